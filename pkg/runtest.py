#!.venv/bin/python

# The shebang may point towards a venv, but CI executes python -m runtest

import os
import shutil
import subprocess
import sys
import traceback
import unittest

from test.runtime import ResultAdapter, StyledStream


if __name__ == "__main__":
    stream = sys.stdout
    styled = StyledStream(stream)

    def println(s: str = "") -> None:
        stream.write(s)
        stream.write("\n")
        stream.flush()

    println(styled.heading("1. Setup"))
    for label, value in (
        ("Python", sys.executable),
        ("Python Version", sys.version.split()[0]),
        ("Standard Out/Err Encoding", f"{sys.stdout.encoding}, {sys.stderr.encoding}"),
        ("Current Directory", os.getcwd()),
        ("Exhaustive Sweeps", os.environ.get("CONTRACTCHAIN_EXHAUSTIVE", "n/a")),
    ):
        println(styled.subheading(label))
        println(value)

    println(styled.heading("2. Type Checking"))
    pyright = shutil.which("pyright")
    if pyright is None:
        println("pyright is not installed; skipping type checking")
    else:
        try:
            subprocess.run([pyright], check=True)
        except subprocess.CalledProcessError:
            println(styled.failure(" contractchain failed to type check! "))
            sys.exit(1)

    println(styled.heading("3. Unit Testing"))
    try:
        runner = unittest.main(
            module="test",
            exit=False,
            testRunner=unittest.TextTestRunner(
                stream=stream, resultclass=ResultAdapter
            ),
        )
        sys.exit(not runner.result.wasSuccessful())
    except Exception as x:
        trace = traceback.format_exception(x)
        println("".join(trace[:-1]))
        println(styled.err(trace[-1]))
        sys.exit(1)
