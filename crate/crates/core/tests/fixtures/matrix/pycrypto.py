import os
from Crypto.Cipher import AES, DES, DES3, Blowfish
from Crypto.Protocol.KDF import PBKDF2

key = os.urandom(16)
iv = os.urandom(16)
salt = os.urandom(16)

a = AES.new(key, AES.MODE_ECB)  # expect: R1 definite
b = DES.new(key[:8], DES.MODE_CBC, b'12345678')  # expect: R2 definite
c = DES3.new(b'0123456789abcdef', DES3.MODE_CBC, iv=iv[:8])  # expect: R3 definite
d = PBKDF2('secret', b'NaCl', 32, 5000)  # expect: R4 definite
e = PBKDF2('secret', salt, 32, count=10)  # expect: R5 definite
f = Blowfish.new(key, Blowfish.MODE_CBC, iv[:8])
g = Blowfish.new(key, mode=Blowfish.MODE_ECB)  # expect: R1 definite
