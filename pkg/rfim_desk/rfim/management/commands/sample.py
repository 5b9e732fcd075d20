from datetime import datetime, timezone
from pathlib import Path

from rfim.exceptions import InputError, ValidationFailure
from rfim.experiments import package_versions
from rfim.files import read_json, write_csv, write_json, write_model
from rfim.sampler import (calibrate_c_star, incremental_sample, k_star, warm_start_constant, warm_start_preconditions,
                          warm_start_tv_bound)
from rfim.serializers import SamplerConfigSerializer, load

from ._base import RfimCommand, parse_floats

STAGE_COLUMNS = ('stage', 'vertex', 'steps')


class Command(RfimCommand):
    help = "Incremental warm-start sampling: incremental, warmstart, calibrate."
    actions = ('incremental', 'warmstart', 'calibrate')

    def _config_arguments(self, parser):
        self.model_argument(parser)
        parser.add_argument('--config', help="Sampler config JSON; command-line flags override it.")
        parser.add_argument('--cstar', type=float)
        parser.add_argument('--ordering-seed', type=int)
        parser.add_argument('--per-component', action='store_true')
        parser.add_argument('--prefix-k', action='store_true', help="Use the prefix size instead of n for k*.")
        parser.add_argument('--eps', type=float)
        parser.add_argument('--replicas', type=int)

    def _config(self, options, validate=False):
        data = read_json(options['config']) if options['config'] else {}
        data['seed'] = options['seed']
        for key, option in (('c_star', 'cstar'), ('ordering_seed', 'ordering_seed'), ('eps', 'eps'),
                            ('replicas', 'replicas')):
            if options[option] is not None:
                data[key] = options[option]
        for key in ('per_component', 'prefix_k'):
            if options[key]:
                data[key] = True
        if validate:
            data['validate_output'] = True
        return load(SamplerConfigSerializer, data, "sampler config")

    def add_incremental_arguments(self, parser):
        self._config_arguments(parser)
        parser.add_argument('--validate', action='store_true',
                            help="Compare replicas against the exact law; exit 2 when TV exceeds eps.")

    def handle_incremental(self, validate, out, **options):
        model = self.load_model(options)
        config = self._config(options, validate)
        final, report = incremental_sample(model, config)
        stages = [(i, v, steps) for i, (v, steps) in enumerate(zip(report.order, report.stage_steps))]
        summary = {
            "n": model.n,
            "c_star": config.c_star,
            "k_star": k_star(model.n, config.c_star),
            "total_updates": report.total_updates,
            "wall_time": report.wall_time,
            "order": report.order,
            "tv": report.tv,
            "tv_stderr": report.tv_stderr,
            "eps": report.eps,
        }
        if out:
            out_dir = Path(out)
            write_json({
                "command": "sample incremental",
                "created_at": datetime.now(timezone.utc).isoformat(),
                "seed": config.seed,
                "ordering_seed": config.order_seed,
                "config": SamplerConfigSerializer(config).data,
                "versions": package_versions(),
                "summary": summary,
                "files": ["report.csv", "final_state.json"],
            }, out_dir / "manifest.json")
            write_csv(stages, STAGE_COLUMNS, out_dir / "report.csv")
            write_model(model, out_dir / "final_state.json", configuration=final)
            self.stdout.write(self.style.SUCCESS(f"Wrote {out_dir}"))
        else:
            self.emit({**summary, "final": final})
        if not report.passed:
            raise ValidationFailure(f"Sampler TV {report.tv:.4f} exceeds eps={report.eps}.")

    def add_warmstart_arguments(self, parser):
        parser.add_argument('--M', type=float,
                            help="Warm-start density bound; derived from --beta and --c-alpha if omitted.")
        parser.add_argument('--beta', type=float)
        parser.add_argument('--c-alpha', type=float)
        parser.add_argument('--A', type=float, required=True)
        parser.add_argument('--p', type=float, required=True)
        parser.add_argument('--k', type=int, required=True)

    def handle_warmstart(self, M, beta, c_alpha, A, p, k, out, **options):
        if M is None:
            if beta is None or c_alpha is None:
                raise InputError("Pass --M, or --beta with --c-alpha.")
            M = warm_start_constant(beta, c_alpha)
        self.emit({
            "M": M,
            "A": A,
            "p": p,
            "k": k,
            "bound": warm_start_tv_bound(M, A, p, k),
            "precondition_violations": warm_start_preconditions(A, p, k),
        }, out)

    def add_calibrate_arguments(self, parser):
        self._config_arguments(parser)
        parser.add_argument('--grid', default='0.5,1,1.5,2,2.5,3', help="Comma-separated c* values.")

    def handle_calibrate(self, grid, out, **options):
        model = self.load_model(options)
        c_grid = parse_floats(grid)
        if not c_grid:
            raise InputError("--grid needs at least one c* value.")
        # c* in the base config is replaced per grid point
        config = self._config(dict(options, cstar=options['cstar'] or max(c_grid)))
        self.emit(calibrate_c_star(model, c_grid, config), out)
