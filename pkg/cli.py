import argparse
import asyncio
import json
import logging
import sys

from dppcond.config import settings
from dppcond.corpus import DEFAULT_CORPUS, CorpusEntry, CorpusSpec, gen_corpus, load_corpus_spec
from dppcond.errors import ConfigError, DppError
from dppcond.experiment import load_config
from dppcond.graph.pipeline import run_experiment
from dppcond.kernel.io import describe_kernel, format_description, load_kernel

logger = logging.getLogger('dppcond.cli')


def _overrides(pairs: list[str] | None) -> dict[str, float] | None:
    if not pairs:
        return None
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition('=')
        try:
            if not sep:
                raise ValueError(pair)
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f'--tol-override expects KEY=VALUE, got {pair!r}') from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Conditional kernels of determinantal point processes')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Run the checks of an experiment config')
    run.add_argument('--config', required=True, help='Experiment config JSON')
    run.add_argument('--seed', type=int, help='Override the master seed')
    run.add_argument('--trials', type=int, help='Override the Monte Carlo trial count')
    run.add_argument('--mode', choices=['exact', 'mc', 'both'], help='Override the run mode')
    run.add_argument('--out', help='Override the output directory')
    run.add_argument('--tol-override', action='append', metavar='KEY=VAL', help='Tolerance override (repeatable)')

    corpus = sub.add_parser('gen-corpus', help='Generate a randomized kernel corpus')
    corpus.add_argument('--seed', type=int, required=True)
    corpus.add_argument('--spec', help='Corpus spec JSON')
    corpus.add_argument('--count', type=int, help='Kernels of a single class (instead of --spec)')
    corpus.add_argument('--n', type=int, default=6)
    corpus.add_argument('--class', dest='kind', default='projection')
    corpus.add_argument('--rank', type=int)
    corpus.add_argument('--complex', action='store_true')
    corpus.add_argument('--out', default='corpus')

    describe = sub.add_parser('describe', help='Summarize a kernel file')
    describe.add_argument('path')
    describe.add_argument('--json', action='store_true', help='Print the summary as JSON')
    return parser


async def run_command(args: argparse.Namespace) -> int:
    config = load_config(args.config).with_overrides(
        seed=args.seed,
        trials=args.trials,
        mode=args.mode,
        output_dir=args.out,
        tolerances=_overrides(args.tol_override),
    )
    state = await run_experiment(config)
    results = state.get('results', [])
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f'FAIL {r.check_id}[{r.instance}] {r.mode} on {r.kernel_id}: {r.statistic:.3e} > {r.tolerance:.3e}')
    for err in state.get('errors', []):
        print(f'ERROR {err}', file=sys.stderr)
    print(f'{len(results) - len(failed)}/{len(results)} checks passed; report in {config.output_dir}')
    return state.get('exit_code', 0)


def corpus_command(args: argparse.Namespace) -> int:
    if args.spec:
        spec = load_corpus_spec(args.spec)
    elif args.count is not None:
        try:
            spec = CorpusSpec(entries=[CorpusEntry(kind=args.kind, count=args.count, n=args.n, rank=args.rank,
                                                   complex=args.complex)])
        except ValueError as e:
            raise ConfigError(f'invalid corpus class: {e}') from e
    else:
        spec = DEFAULT_CORPUS
    rows = gen_corpus(args.seed, spec, args.out)
    print(f'wrote {len(rows)} kernels to {args.out}')
    return 0


def describe_command(args: argparse.Namespace) -> int:
    summary = describe_kernel(load_kernel(args.path))
    print(json.dumps(summary, indent=2) if args.json else format_description(summary))
    return 0


async def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.log_level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        if args.command == 'run':
            return await run_command(args)
        if args.command == 'gen-corpus':
            return corpus_command(args)
        return describe_command(args)
    except DppError as e:
        logger.error('%s: %s', type(e).__name__, e)
        print(f'error: {e}', file=sys.stderr)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(asyncio.run(main()))
