from setuptools import setup

setup(name="netpulse", version="0.1.0")
