from setuptools import setup
import os
import sys


def check_environment():
    root = os.path.dirname(os.path.abspath(__file__))
    status = os.system("pip --version")
    if status != 0:
        sys.exit(1)
    return root


check_environment()

setup(name="buildhelper", version="0.1.0")
