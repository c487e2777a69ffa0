import os
import pyperclip


def _sync():
    token = os.getenv("API_TOKEN")
    clip = pyperclip.paste()
    pyperclip.copy(clip)
    return token, clip


_sync()
