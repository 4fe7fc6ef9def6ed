import argparse
import logging
import os
import sys
from configparser import ConfigParser

from ..cbc import cbc_p, cbc_s
from ..criteria import P_PRECISION_BITS, p_star, s_star
from ..interpolant import fit_function, l2_error_estimate, random_unit_function
from ..korobov_space import SpaceParams
from ..lattice import read_generating_vector, write_generating_vector
from ..spectral import NATIVE_BITS, precision
from .experiments import FULL_SCALE, ExperimentConfig, emit_outputs, run_convergence, run_dimension, slope_summary
from .utils import env_int, parse_bool, parse_criteria

logger = logging.getLogger(__name__)

PACKAGE = __package__.rpartition(".")[0]
PRECISION_ENV = "LATTICEKERNEL_PRECISION_BITS"
DEFAULTS = ExperimentConfig()


# ---------------------------------------------------------
# Application class
# ---------------------------------------------------------


class LatticeKernelApp:
    def __init__(self):
        self.config = ConfigParser()
        self.parser = self._build_parser()

    def load_config(self, config_file_path=None):
        """
        Load the configuration file app.cfg if any.
        Every key is optional; command-line flags take precedence over it.
        """
        if config_file_path is None:
            current_working_directory = os.getcwd()
            config_file_path = os.path.join(current_working_directory, "app.cfg")

        if os.path.exists(config_file_path) is False:
            return

        self.config.read(config_file_path)

    def configure_logs(self, log_level=None):
        log_level = log_level or self.config.get("logging", "log_level", fallback="INFO")
        logging.basicConfig(stream=sys.stdout)
        # Silence dependencies logs and keep only the package ones
        logging.getLogger().setLevel(logging.WARNING)
        logging.getLogger(PACKAGE).setLevel(log_level.upper())

    def precision_bits(self, flag=None):
        """--precision-bits > LATTICEKERNEL_PRECISION_BITS > [precision] bits > 256."""
        if flag is not None:
            return flag
        from_env = env_int(PRECISION_ENV)
        if from_env is not None:
            return from_env
        return self.config.getint("precision", "bits", fallback=P_PRECISION_BITS)

    def setting(self, flag, key, fallback, convert=str):
        if flag is not None:
            return flag
        value = self.config.get("experiments", key, fallback=None)
        return fallback if value is None else convert(value)

    def experiment_config(self, args, **kwargs):
        criteria = self.setting(args.criteria, "criteria", ",".join(DEFAULTS.criteria))
        values = {
            "criteria": parse_criteria(criteria),
            "alpha": self.setting(args.alpha, "alpha", DEFAULTS.alpha, int),
            "weights": self.setting(args.weights, "weights", DEFAULTS.weights),
            "precision_bits": self.precision_bits(args.precision_bits),
            "out_dir": self.setting(args.out_dir, "out_dir", DEFAULTS.out_dir),
            "seed": self.config.getint("experiments", "seed", fallback=DEFAULTS.seed),
            "workers": self.setting(args.workers, "workers", DEFAULTS.workers, int),
            "timings": parse_bool(self.config.get("experiments", "timings", fallback="yes")),
        }
        values.update(kwargs)
        return ExperimentConfig(**values)

    # ---------------------------------------------------------
    # Command line
    # ---------------------------------------------------------

    def _build_parser(self):
        parser = argparse.ArgumentParser(
            prog="latticekernel",
            description="Rank-1 lattices for kernel interpolation in weighted Korobov spaces",
        )
        parser.add_argument("--config", help="configuration file (default: ./app.cfg)")
        parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
        subparsers = parser.add_subparsers(dest="command", required=True)

        def add_space(subparser):
            subparser.add_argument("--alpha", type=int)
            subparser.add_argument("--weights", help="poly3a | poly2 | geo09 | equal | list:<values>")
            subparser.add_argument("--precision-bits", type=int)

        def add_study(subparser):
            add_space(subparser)
            subparser.add_argument("--criteria", help="S, P or S,P")
            subparser.add_argument("--out-dir")
            subparser.add_argument("--workers", type=int)

        cbc = subparsers.add_parser("cbc", help="construct and save a generating vector")
        cbc.add_argument("--n", type=int, required=True)
        cbc.add_argument("--d", type=int, required=True)
        cbc.add_argument("--criterion", choices=("S", "P"), default="S")
        cbc.add_argument("--workers", type=int)
        cbc.add_argument("--vector-out")
        add_space(cbc)
        cbc.set_defaults(handler=self.run_cbc)

        evaluate = subparsers.add_parser("eval", help="evaluate the criteria of a saved vector")
        evaluate.add_argument("--vector-in", required=True)
        evaluate.add_argument("--criterion", choices=("S", "P", "both"), default="both")
        add_space(evaluate)
        evaluate.set_defaults(handler=self.run_eval)

        convergence = subparsers.add_parser("convergence", help="criteria against n = 2^m")
        convergence.add_argument("--m-from", type=int)
        convergence.add_argument("--m-to", type=int)
        convergence.add_argument("--d", type=int)
        convergence.add_argument("--full-scale", action="store_true", help="m = 10..14, d = 10")
        add_study(convergence)
        convergence.set_defaults(handler=self.run_convergence)

        dimension = subparsers.add_parser("dimension", help="criteria against d for a fixed n = 2^m")
        dimension.add_argument("--m", type=int)
        dimension.add_argument("--d-max", type=int)
        add_study(dimension)
        dimension.set_defaults(handler=self.run_dimension)

        demo = subparsers.add_parser("interp-demo", help="interpolate a random unit-norm function")
        demo.add_argument("--n", type=int, default=128)
        demo.add_argument("--d", type=int, default=4)
        demo.add_argument("--seed", type=int)
        demo.add_argument("--n-terms", type=int, default=16)
        demo.add_argument("--max-freq", type=int, default=8)
        demo.add_argument("--n-eval", type=int, default=4096)
        add_space(demo)
        demo.set_defaults(handler=self.run_interp_demo)
        return parser

    def run(self, argv=None):
        args = self.parser.parse_args(argv)
        self.load_config(args.config)
        self.configure_logs(args.log_level)
        try:
            args.handler(args)
        except (ArithmeticError, RuntimeError, ValueError, OSError) as e:
            logger.error(f"{args.command} failed: {e}")
            return 1
        return 0

    def space(self, args, d):
        alpha = self.setting(args.alpha, "alpha", DEFAULTS.alpha, int)
        weights = self.setting(args.weights, "weights", DEFAULTS.weights)
        return SpaceParams.create(alpha, weights, d)

    def run_cbc(self, args):
        params = self.space(args, args.d)
        if args.criterion == "S":
            result = cbc_s(args.n, args.d, params)
            bits = NATIVE_BITS
        else:
            bits = self.precision_bits(args.precision_bits)
            workers = self.setting(args.workers, "workers", DEFAULTS.workers, int)
            result = cbc_p(args.n, args.d, params, precision(bits), workers)
            for diagnostic in result.diagnostics:
                logger.info(f"Skipped candidate {diagnostic}")
        print(result.gv)
        print(f"{args.criterion}*={float(result.value):.12e}")
        if args.vector_out:
            metadata = {
                "criterion": args.criterion,
                "alpha": params.alpha,
                "weights": params.weights.name,
                "precision": bits,
            }
            write_generating_vector(args.vector_out, result.gv, metadata)

    def run_eval(self, args):
        gv, metadata = read_generating_vector(args.vector_in)
        alpha = args.alpha if args.alpha is not None else int(metadata.get("alpha", DEFAULTS.alpha))
        weights = args.weights or metadata.get("weights") or self.setting(None, "weights", DEFAULTS.weights)
        params = SpaceParams.create(alpha, weights, gv.d)
        print(gv)
        if args.criterion in ("S", "both"):
            print(f"S*={float(s_star(gv, params)):.12e}")
        if args.criterion in ("P", "both"):
            print(f"P*={float(p_star(gv, params, precision(self.precision_bits(args.precision_bits)))):.12e}")

    def run_convergence(self, args):
        grid = {
            "m_from": self.setting(args.m_from, "m_from", DEFAULTS.m_from, int),
            "m_to": self.setting(args.m_to, "m_to", DEFAULTS.m_to, int),
            "d": self.setting(args.d, "d", DEFAULTS.d, int),
        }
        if args.full_scale:
            grid.update(FULL_SCALE)
        config = self.experiment_config(args, **grid)
        records = run_convergence(config)
        emit_outputs(records, config, "convergence")
        for kind, slope in slope_summary(records).items():
            print(f"{kind} slope={slope:.4f}")

    def run_dimension(self, args):
        config = self.experiment_config(
            args,
            m=self.setting(args.m, "m", DEFAULTS.m, int),
            d_max=self.setting(args.d_max, "d_max", DEFAULTS.d_max, int),
        )
        records = run_dimension(config)
        for path in emit_outputs(records, config, "dimension"):
            print(path)

    def run_interp_demo(self, args):
        params = self.space(args, args.d)
        gv = cbc_s(args.n, args.d, params).gv
        s_value = float(s_star(gv, params))
        p_value = float(p_star(gv, params, precision(self.precision_bits(args.precision_bits))))
        seed = self.setting(args.seed, "seed", DEFAULTS.seed, int)
        f = random_unit_function(params, args.n_terms, args.max_freq, seed)
        estimate = l2_error_estimate(fit_function(gv, params, f), f, args.n_eval, seed)
        print(gv)
        print(f"L2 error estimate={estimate:.6e}")
        print(f"S*={s_value:.6e}")
        print(f"P*={p_value:.6e}")
        if estimate > min(s_value, p_value):
            logger.warning("L2 error estimate exceeds min(S*, P*)")
