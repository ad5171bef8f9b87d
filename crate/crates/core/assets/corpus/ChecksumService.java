package org.example.crypto;

import java.nio.charset.StandardCharsets;
import java.security.MessageDigest;

public class ChecksumService {

    /** Computes the SHA-256 checksum of a text. */
    public byte[] checksum(String text) throws Exception {
        MessageDigest digest = MessageDigest.getInstance("SHA-256");
        digest.update(text.getBytes(StandardCharsets.UTF_8));
        return digest.digest();
    }
}
