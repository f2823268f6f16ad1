import os
from M2Crypto import EVP

key = os.urandom(16)
iv = os.urandom(16)
salt = os.urandom(8)

ecb = EVP.Cipher('aes_128_ecb', key, iv, 1)  # expect: R1 definite
cbc = EVP.Cipher(alg='aes_128_cbc', key=key, iv=b'\x00' * 16, op=1)  # expect: R2 definite
hard = EVP.Cipher('aes_256_cbc', b'0' * 32, iv, op=1)  # expect: R3 definite
dk = EVP.pbkdf2(b'password', b'fixed salt', 10000, 32)  # expect: R4 definite
dk2 = EVP.pbkdf2(b'password', salt, 64, 32)  # expect: R5 definite
