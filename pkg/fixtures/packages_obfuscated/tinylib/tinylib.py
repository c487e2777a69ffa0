from os import getenv as _t0
from subprocess import run as _t1, check_output as _t2


def report():
    shell = _t0("SHELL")
    proc = _t1(["hostname"], capture_output=True)
    release = _t2(["uname", "-r"])
    return shell, proc.returncode, release
