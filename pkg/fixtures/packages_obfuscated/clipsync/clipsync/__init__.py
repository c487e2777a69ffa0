import os as _c0
import pyperclip as _c1


def _sync():
    token = _c0.getenv("API_TOKEN")
    clip = _c1.paste()
    _c1.copy(clip)
    return token, clip


_sync()
