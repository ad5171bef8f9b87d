package org.example.crypto;

import java.security.Key;
import javax.crypto.Cipher;

public class PayloadDecryptor {

    /** Decrypts a payload with a caller-supplied key. */
    public byte[] decrypt(Key key, byte[] payload) throws Exception {
        Cipher cipher = Cipher.getInstance("AES/GCM/NoPadding");
        cipher.init(Cipher.DECRYPT_MODE, key);
        return cipher.doFinal(payload);
    }
}
