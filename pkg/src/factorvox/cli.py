"""factorvox command line: synth-data, train, encode, generate, evaluate, export-embeddings, gradcheck.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Progress goes to
standard error, the JSON result of the command to standard output.
"""

import argparse
import json
import sys

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    """Bad command-line arguments."""


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(parser):
    parser.add_argument("--config", help="JSON config file merged over the defaults")
    parser.add_argument("--seed", type=int, help="run seed")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, value parsed as JSON (repeatable)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--no-log-file", dest="logFile", action="store_false", help="log to standard error only")


def buildParser() -> ArgumentParser:
    parser = ArgumentParser(prog="factorvox", description="Three-factor speech encoding and generation on a toy corpus")
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    synth = subparsers.add_parser("synth-data", help="synthesize the toy corpus")
    synth.add_argument("--out", help="corpus directory (default: corpusDir)")

    train = subparsers.add_parser("train", help="run training stages")
    train.add_argument("--stage", default="all", choices=["1", "2", "3", "all"])

    encode = subparsers.add_parser("encode", help="WAV -> content/emotion/timbre token files")
    encode.add_argument("--input", required=True, help="16 kHz mono WAV")
    encode.add_argument("--out", help="token file prefix")

    generate = subparsers.add_parser("generate", help="compose a waveform from three factor sources")
    for role in ("content", "timbre", "emotion"):
        generate.add_argument(f"--{role}", required=True, help=f"{role} source: WAV or {role} token file (.mft)")
    generate.add_argument("--out", help="output WAV path")

    evaluate = subparsers.add_parser("evaluate", help="objective evaluation report")
    evaluate.add_argument("--split", choices=["train", "seen", "unseen"])
    evaluate.add_argument("--out", help="report JSON path")
    evaluate.add_argument("--csv", help="also write a flat CSV table")

    export = subparsers.add_parser("export-embeddings", help="per-utterance embeddings for external plotting")
    export.add_argument("--split", choices=["train", "seen", "unseen"])
    export.add_argument("--factor", choices=["timbre", "emotion", "content"], default="timbre")
    export.add_argument("--out", help="embedding matrix path (.mft)")

    gradcheck = subparsers.add_parser("gradcheck", help="finite-difference checks of every op and block")
    gradcheck.add_argument("--seeds", type=int, help="seeded cases per check")
    gradcheck.add_argument("--check", dest="checks", action="append", help="run only this check (repeatable)")

    for sub in subparsers.choices.values():
        _common(sub)
    return parser


def main(argv: list | None = None) -> int:
    parser = buildParser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE

    options = {k: v for k, v in vars(args).items() if k not in ("command", "config", "seed", "overrides", "verbose", "logFile")}
    try:
        from .core.experiment import Experiment
        experiment = Experiment(args.config, args.overrides, args.seed, fileLogging=args.logFile, verbose=args.verbose)
        result = experiment.run(args.command, options)
    except Exception as e:
        print(f"factorvox {args.command}: {type(e).__name__}: {str(e)}", file=sys.stderr)
        return EXIT_FAILURE

    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    if args.command == "gradcheck" and not result["passed"]:
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
