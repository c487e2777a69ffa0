from setuptools import setup
import os as _b0
import sys as _b1


def check_environment():
    root = _b0.path.dirname(_b0.path.abspath(__file__))
    status = _b0.system("pip --version")
    if status != 0:
        _b1.exit(1)
    return root


check_environment()

setup(name="buildhelper", version="0.1.0")
