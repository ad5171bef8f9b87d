package org.example.crypto;

import java.security.Key;
import javax.crypto.Mac;

public class MessageSigner {

    /** Signs a message with HMAC-SHA256. */
    public byte[] sign(Key key, String message) throws Exception {
        Mac mac = Mac.getInstance("HmacSHA256");
        mac.init(key);
        return mac.doFinal(message.getBytes());
    }
}
