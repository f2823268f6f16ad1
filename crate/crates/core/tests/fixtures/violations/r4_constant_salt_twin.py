import os
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

salt = os.urandom(32)
kdf = PBKDF2HMAC(hashes.SHA256(), 32, salt, 10000)
