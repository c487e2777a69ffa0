from setuptools import setup

setup(name="tokenledger", version="0.1.0")
