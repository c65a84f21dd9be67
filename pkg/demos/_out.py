"""Small helpers shared by the demo scripts: output folder and gnuplot stubs."""
import os

OUT = os.environ.get("DJC_DEMO_OUT", os.path.join(os.path.dirname(__file__), "out"))


def path(name):
    os.makedirs(OUT, exist_ok=True)
    return os.path.join(OUT, name)


def gnuplot(name, body):
    """Write a gnuplot script next to the data; plotting is left to the reader."""
    with open(path(name), "w") as fh:
        fh.write("set datafile separator ','\n")
        fh.write(body.strip() + "\n")
    return path(name)
