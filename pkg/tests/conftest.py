import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def hello_world_tokens() -> list[int]:
    return [ord(c) for c in "helloworld"]


def lloyd_tokens() -> list[int]:
    return [ord(c) for c in "lloyd"]
