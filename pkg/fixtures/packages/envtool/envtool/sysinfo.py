import os
import subprocess


def current_status():
    home = os.getenv("HOME")
    proc = subprocess.run(["uptime"], capture_output=True)
    banner = subprocess.check_output(["uname", "-a"])
    return home, proc.returncode, banner
