from nacl.secret import SecretBox

KEY = b'a' * 32
globals()['KEY'] = b'b' * 32
box = SecretBox(KEY)
