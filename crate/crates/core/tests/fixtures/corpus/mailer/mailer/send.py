import os
from Crypto.Cipher import AES


def wrap(body):
    return AES.new(os.urandom(32), AES.MODE_CTR, nonce=os.urandom(8)).encrypt(body)


wrap(b'hello')
