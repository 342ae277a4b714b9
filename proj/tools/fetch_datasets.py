#!/usr/bin/env python3
"""Fetch rating datasets into ./data.

MovieLens 100K is obtained from the copy bundled with the `recbole` wheel on
PyPI (recbole/dataset_example/ml-100k/ml-100k.inter, tab separated with a
header line). FilmTrust and Amazon Music have no package mirror; drop their
rating files into data/filmtrust/ratings.txt and data/amusic/ratings.csv by
hand (URLs in README.md).
"""

import argparse
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ML100K_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def fetch_ml100k(dest: pathlib.Path, wheel: str | None) -> pathlib.Path:
    out = dest / "ml-100k" / "ratings.tsv"
    if out.exists():
        print(f"{out} already present")
        return out
    out.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "--timeout", "120",
                 "recbole==1.2.1", "-d", tmp],
                check=True,
            )
            wheel = next(pathlib.Path(tmp).glob("recbole-*.whl")).as_posix()
        with zipfile.ZipFile(wheel) as zf:
            out.write_bytes(zf.read(ML100K_MEMBER))
    print(f"wrote {out}")
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", default=pathlib.Path(__file__).resolve().parent.parent / "data",
                        type=pathlib.Path)
    parser.add_argument("--recbole-wheel", default=None,
                        help="use an already downloaded recbole wheel")
    args = parser.parse_args()
    fetch_ml100k(args.dest, args.recbole_wheel)
    return 0


if __name__ == "__main__":
    sys.exit(main())
