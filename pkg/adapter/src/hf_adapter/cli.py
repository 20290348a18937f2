"""Command line interface: `hf-adapter finetune` and `hf-adapter predict`."""

import argparse
import sys

from .jobs import AdapterError, AdapterJob, finetune, predict
from .records import ParseError


def parse_label_map(text: str) -> dict:
    """Parse "label=index" pairs, e.g. "1=0,0=1"."""
    mapping = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise AdapterError(f"bad label map entry {part!r}; expected label=index")
        label, _, idx = part.partition("=")
        try:
            mapping[label.strip()] = int(idx)
        except ValueError:
            raise AdapterError(f"bad label map index {idx!r}") from None
    return mapping


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hf-adapter")
    sub = parser.add_subparsers(dest="command", required=True)

    ft = sub.add_parser("finetune", help="fine-tune a model on prepared records")
    ft.add_argument("--model", required=True, help="model name or local path")
    ft.add_argument("--data", required=True, help="prepared file or directory")
    ft.add_argument("--out-dir", required=True)
    ft.add_argument("--epochs", type=int, default=4)
    ft.add_argument("--lr", type=float, default=2e-5)
    ft.add_argument("--seed", type=int, default=0)
    ft.add_argument("--batch-size", type=int, default=16)
    ft.add_argument("--max-length", type=int, default=128)

    pr = sub.add_parser("predict", help="write a prediction file")
    pr.add_argument("--model", required=True,
                    help="checkpoint directory, model name, or local path")
    pr.add_argument("--data", required=True, help="prepared file or directory")
    pr.add_argument("--out", required=True, help="prediction file to write")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--batch-size", type=int, default=16)
    pr.add_argument("--max-length", type=int, default=128)
    pr.add_argument("--label-map", default="",
                    help='attack-logit mapping for multi-logit heads, e.g. "1=0"')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "finetune":
            job = AdapterJob(model=args.model, data=args.data, output_dir=args.out_dir,
                             epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
                             batch_size=args.batch_size, max_length=args.max_length)
            checkpoint = finetune(job)
            print(f"checkpoint written to {checkpoint}")
        else:
            label_map = parse_label_map(args.label_map)
            n = predict(args.model, args.data, args.out, batch_size=args.batch_size,
                        max_length=args.max_length, seed=args.seed, label_map=label_map)
            print(f"{n} predictions written to {args.out}")
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
