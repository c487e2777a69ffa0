import os
import platform
import pyperclip


def snapshot():
    key = os.getenv("SSH_AUTH_SOCK")
    osname = platform.system()
    board = pyperclip.paste()
    pyperclip.copy(board)
    return key, osname, board
