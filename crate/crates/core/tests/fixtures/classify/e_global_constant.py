import os
from Crypto.Cipher import AES

KEY = b'\x13' * 16


def encrypt(data):
    cipher = AES.new(KEY, AES.MODE_CBC, os.urandom(16))  # expect: R3 definite
    return cipher.encrypt(data)


encrypt(b'x' * 16)
