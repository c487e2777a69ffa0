"""String helpers with no system access."""


def shout(text):
    return text.upper() + "!"


def indent(text, width=4):
    pad = " " * width
    return "\n".join(pad + line for line in text.splitlines())
