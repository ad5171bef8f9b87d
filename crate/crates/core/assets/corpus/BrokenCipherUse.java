package org.example.crypto;

import javax.crypto.Cipher;

public class BrokenCipherUse {

    /** Seals data without initializing the cipher. */
    public byte[] seal(byte[] data) throws Exception {
        Cipher cipher = Cipher.getInstance("AES/GCM/NoPadding");
        return cipher.doFinal(data);
    }
}
