package org.example.crypto;

import javax.crypto.SecretKey;
import javax.crypto.SecretKeyFactory;
import javax.crypto.spec.DESKeySpec;

public class LegacyKeyLoader {

    /** Loads a legacy DES key. */
    public SecretKey load(byte[] material) throws Exception {
        DESKeySpec spec = new DESKeySpec(material);
        SecretKeyFactory factory = SecretKeyFactory.getInstance("DES");
        return factory.generateSecret(spec);
    }
}
