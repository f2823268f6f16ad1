import os
import sys
from Crypto.Cipher import AES

env_key = os.environ.get('APP_KEY', 'x' * 16)
cipher = AES.new(env_key, AES.MODE_CTR, nonce=os.urandom(8))  # expect: R3 potential(external_input)
mode = len(sys.argv) and AES.MODE_CBC
other = AES.new(os.urandom(16), mode, os.urandom(16))  # expect: R1 potential(dynamic_value)
