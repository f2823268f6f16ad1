import os
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC


def derive(iterations):
    salt = os.urandom(16)
    return PBKDF2HMAC(hashes.SHA256(), 32, salt, iterations)  # expect: R5 potential(dynamic_value)


fast = derive(10)
slow = derive(200000)
