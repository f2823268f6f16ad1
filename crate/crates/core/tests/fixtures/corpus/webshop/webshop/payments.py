import os
from Crypto.Cipher import AES


def token(data):
    return AES.new(os.urandom(16), AES.MODE_CTR, nonce=os.urandom(8)).encrypt(data)


token(b'order')
