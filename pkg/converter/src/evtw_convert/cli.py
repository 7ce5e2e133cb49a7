"""Command-line entry: evtw-convert --checkpoint model.pth --out weights.evtw"""

from __future__ import annotations

import argparse
import sys

from .convert import ConvertError, convert


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="evtw-convert", description=__doc__)
    parser.add_argument("--checkpoint", required=True,
                        help="source checkpoint (.pt/.pth state dict or .npz)")
    parser.add_argument("--out", required=True, help="EVTW output path")
    args = parser.parse_args(argv)
    try:
        info = convert(args.checkpoint, args.out)
    except ConvertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for layer in info["layers"]:
        tap = " tap" if layer["is_tap"] else ""
        pool = " +pool" if layer["pool_after"] else ""
        print(f"{layer['name']}: {layer['in_channels']}->{layer['out_channels']}"
              f" {layer['kernel'][0]}x{layer['kernel'][1]}{pool}{tap}")
    print(f"sha256={info['sha256']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
