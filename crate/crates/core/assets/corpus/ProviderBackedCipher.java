package org.example.crypto;

import java.security.Security;
import javax.crypto.Cipher;
import javax.crypto.spec.SecretKeySpec;
import org.bouncycastle.jce.provider.BouncyCastleProvider;

public class ProviderBackedCipher {

    /** Decrypts a block with the Bouncy Castle provider. */
    public byte[] decrypt(byte[] keyBytes, byte[] block) throws Exception {
        Security.addProvider(new BouncyCastleProvider());
        SecretKeySpec key = new SecretKeySpec(keyBytes, "AES");
        Cipher cipher = Cipher.getInstance("AES", "BC");
        cipher.init(Cipher.DECRYPT_MODE, key);
        return cipher.doFinal(block);
    }
}
