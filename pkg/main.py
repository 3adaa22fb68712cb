"""
sdMAF Scanner - Command Line
Scan, simulate and summarise sex differences in minor allele frequency
"""

import argparse
import logging
import sys

from config.settings import (
    DEFAULT_SEED,
    ScanConfig,
    SimulationConfig,
    configure_logging,
    load_environment,
)
from core_stats.errors import InputError, SdmafError
from ingest.regions import load_region_map
from scan_report.calibration import hist_from_results, lambda_for_selector, qq_from_results, write_table
from scan_report.miami import miami_export
from scan_report.results import read_results
from scan_report.scanner import output_directory_ready, run_scan, run_simulation
from simulate.null_models import parse_sizes

logger = logging.getLogger("sdmaf")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the input-error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def print_section(title):
    """Print section header"""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def print_summary(summary):
    print_section("Summary")
    for metric, value in summary.metrics():
        print(f"   {metric}: {value}")
    if not summary.lambdas.empty:
        print("\n   lambda per test:")
        for _, row in summary.lambdas.iterrows():
            print(f"   {row['test']:<16} {row['region']:<10} df={row['df']:<3} n={row['n']:<8} lambda={row['lambda']:.4f}")
    for kind, path in summary.outputs.items():
        print(f"   {kind}: {path}")


def cmd_scan(args):
    config = ScanConfig.from_env(
        vcf=args.vcf,
        manifest=args.manifest,
        regions=args.regions,
        out=args.out,
        maf_threshold=args.maf,
        baseline=args.baseline,
        significance=args.threshold,
        tests=args.tests,
        workers=args.workers,
        all_pairs=args.all_pairs or None,
        export_freqs=args.export_freqs,
        on_malformed=args.on_malformed,
    )
    output_directory_ready(config.out)
    print_summary(run_scan(config))
    return EXIT_OK


def cmd_simulate(args):
    config = SimulationConfig.from_env(
        protocol=args.protocol,
        sizes=parse_sizes(args.sizes) if args.sizes else None,
        out=args.out,
        freqs=args.freqs,
        synthetic=args.synthetic,
        region=args.region,
        seed=args.seed,
        maf_threshold=args.maf,
        baseline=args.baseline,
        tests=args.tests,
        workers=args.workers,
        hwd_fraction=args.hwd_fraction,
        sdmaf_shift=args.sdmaf_shift,
    )
    output_directory_ready(config.out)
    print_summary(run_simulation(config))
    return EXIT_OK


def cmd_lambda(args):
    table = read_results(args.input)
    value, n, df = lambda_for_selector(table, args.test, args.df)
    print("test\tdf\tn\tlambda")
    print(f"{args.test}\t{df}\t{n}\t{value:.6f}")
    return EXIT_OK


def _emit(table, out):
    if out:
        output_directory_ready(out)
        write_table(out, table)
    else:
        table.to_csv(sys.stdout, sep="\t", index=False, float_format="%.6g", na_rep="NA")


def cmd_qq(args):
    table = read_results(args.input)
    _emit(qq_from_results(table, args.test, strata=args.strata), args.out)
    return EXIT_OK


def cmd_hist(args):
    table = read_results(args.input)
    _emit(hist_from_results(table, args.test, bins=args.bins), args.out)
    return EXIT_OK


def cmd_miami(args):
    table = read_results(args.input)
    region_map = load_region_map(args.regions) if args.regions else None
    _emit(miami_export(table, args.a, args.b, region_map=region_map), args.out)
    return EXIT_OK


def build_parser():
    parser = CliParser(
        prog="sdmaf",
        description="Multi-population tests for sex differences in minor allele frequency",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--env-file", default=None, help=".env file with SDMAF_* settings")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="run the tests over a VCF")
    scan.add_argument("--vcf", required=True)
    scan.add_argument("--manifest", required=True, help="TSV: sample_id, sex, population")
    scan.add_argument("--regions", default=None, help="X-chromosome PAR/NPR interval file")
    scan.add_argument("--maf", type=float, default=None, help="per-population MAF filter")
    scan.add_argument("--baseline", default=None, help="baseline population (default: first alphabetically)")
    scan.add_argument("--threshold", type=float, default=None, help="significance threshold")
    scan.add_argument("--tests", default=None, help="comma-separated subset of single,multi,pooled,pair-diff,omnibus-diff")
    scan.add_argument("--out", required=True, help="result TSV (.gz compresses)")
    scan.add_argument("--workers", type=int, default=None)
    scan.add_argument("--all-pairs", action="store_true", help="pairwise differences for every population pair")
    scan.add_argument("--export-freqs", default=None, help="write observed frequencies for simulate --freqs")
    scan.add_argument("--on-malformed", choices=["skip", "abort"], default=None)
    scan.set_defaults(handler=cmd_scan)

    simulate = sub.add_parser("simulate", help="simulate a null dataset and test it")
    simulate.add_argument("--protocol", choices=["multipop", "betweenpop"], default="multipop")
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument("--freqs", default=None, help="frequency table from scan --export-freqs")
    source.add_argument("--synthetic", type=int, default=None, help="number of synthetic variants")
    simulate.add_argument("--seed", type=int, default=None, help=f"default SDMAF_SEED or {DEFAULT_SEED}")
    simulate.add_argument("--sizes", default=None, help="POP:n_female:n_male,... (default: 1000 Genomes sizes)")
    simulate.add_argument("--region", default="autosomal", help="region class of synthetic variants")
    simulate.add_argument("--maf", type=float, default=None)
    simulate.add_argument("--baseline", default=None)
    simulate.add_argument("--threshold", type=float, default=None)
    simulate.add_argument("--tests", default=None)
    simulate.add_argument("--workers", type=int, default=None)
    simulate.add_argument("--hwd-fraction", type=float, default=None)
    simulate.add_argument("--sdmaf-shift", type=float, default=None)
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(handler=cmd_simulate)

    lam = sub.add_parser("lambda", help="genomic-control lambda of a result table")
    lam.add_argument("--input", required=True)
    lam.add_argument("--df", type=int, default=None)
    lam.add_argument("--test", default="multi", help="multi, pooled, omnibus, single:POP or diff:POP")
    lam.set_defaults(handler=cmd_lambda)

    qq = sub.add_parser("qq", help="MAF-stratified QQ data")
    qq.add_argument("--input", required=True)
    qq.add_argument("--strata", type=int, default=4)
    qq.add_argument("--test", default="multi")
    qq.add_argument("--out", default=None)
    qq.set_defaults(handler=cmd_qq)

    hist = sub.add_parser("hist", help="p-value histogram data")
    hist.add_argument("--input", required=True)
    hist.add_argument("--bins", type=int, default=20)
    hist.add_argument("--test", default="multi")
    hist.add_argument("--out", default=None)
    hist.set_defaults(handler=cmd_hist)

    miami = sub.add_parser("miami", help="Miami-plot data for two tests")
    miami.add_argument("--input", required=True)
    miami.add_argument("--a", default="multi")
    miami.add_argument("--b", default="pooled")
    miami.add_argument("--regions", default=None)
    miami.add_argument("--out", default=None)
    miami.set_defaults(handler=cmd_miami)
    return parser


def main(argv=None):
    """
    Run the CLI

    Returns:
        Exit code: 0 success, 1 input error, 2 internal error
    """
    args = build_parser().parse_args(argv)
    load_environment(args.env_file)
    try:
        configure_logging(verbose=args.verbose)
        return args.handler(args)
    except (InputError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT
    except SdmafError as e:
        logger.exception(f"Internal error: {e}")
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
