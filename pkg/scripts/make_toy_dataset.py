"""Write the constructed toy puzzles as a dataset directory usable by `mdlarc solve`."""
import argparse

from mdlarc.toys import TOYS, write_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", help="dataset directory; puzzles go to <root>/<split>/<name>.json")
    ap.add_argument("--split", default="toy")
    ap.add_argument("--only", nargs="*", choices=sorted(TOYS), help="subset of toys")
    args = ap.parse_args()
    d = write_dataset(args.root, args.split, tuple(args.only or TOYS))
    print(d)


if __name__ == "__main__":
    main()
