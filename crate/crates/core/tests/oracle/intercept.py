"""Run Python files with the crypto libraries replaced by recording fakes.

Usage: python3 intercept.py FILE...

Every call into a fake library is recorded with its caller's file and line,
the dotted callee path and the encoded arguments. The records are printed
as one JSON document on stdout.
"""

import importlib.abc
import importlib.machinery
import json
import runpy
import sys
import traceback
import types

sys.dont_write_bytecode = True

ROOTS = {"Crypto", "cryptography", "M2Crypto", "nacl", "ucryptolib", "cryptolib"}
RECORDS = []


class Fake:
    """Stand-in for any object reachable from a fake library."""

    def __init__(self, path):
        object.__setattr__(self, "_path", path)

    def __getattr__(self, name):
        if name.startswith("__"):
            raise AttributeError(name)
        return Fake(self._path + "." + name)

    def __setattr__(self, name, value):
        pass

    def __call__(self, *args, **kwargs):
        frame = sys._getframe(1)
        RECORDS.append(
            {
                "file": frame.f_code.co_filename,
                "line": frame.f_lineno,
                "callee": self._path,
                "args": [encode(a) for a in args],
                "kwargs": {k: encode(v) for k, v in kwargs.items()},
            }
        )
        return Fake(self._path + "()")

    def __getitem__(self, key):
        return Fake(self._path + "[]")

    def __len__(self):
        return 16

    def __bytes__(self):
        return b"\0" * 16


class FakeModule(types.ModuleType):
    def __getattr__(self, name):
        if name.startswith("__"):
            raise AttributeError(name)
        return Fake(self.__name__ + "." + name)


class FakeFinder(importlib.abc.MetaPathFinder, importlib.abc.Loader):
    def find_spec(self, fullname, path, target=None):
        if fullname.split(".")[0] in ROOTS:
            return importlib.machinery.ModuleSpec(fullname, self, is_package=True)
        return None

    def create_module(self, spec):
        module = FakeModule(spec.name)
        module.__path__ = []
        return module

    def exec_module(self, module):
        pass


def encode(value):
    if isinstance(value, bool):
        return {"kind": "Other", "value": repr(value)}
    if isinstance(value, (bytes, bytearray)):
        return {"kind": "Bytes", "value": bytes(value).hex()}
    if isinstance(value, int):
        if -(2**63) <= value < 2**63:
            return {"kind": "Int", "value": value}
        return {"kind": "Other", "value": str(value)}
    if isinstance(value, str):
        return {"kind": "Str", "value": value}
    if isinstance(value, Fake):
        path = value._path
        if path.endswith("()"):
            path = path[:-2]
        return {"kind": "EnumConst", "value": path}
    return {"kind": "Other", "value": type(value).__name__}


def main(paths):
    sys.meta_path.insert(0, FakeFinder())
    errors = {}
    for path in paths:
        try:
            runpy.run_path(path, run_name="__main__")
        except BaseException:
            errors[path] = traceback.format_exc(limit=3)
    json.dump({"records": RECORDS, "errors": errors}, sys.stdout)


if __name__ == "__main__":
    main(sys.argv[1:])
