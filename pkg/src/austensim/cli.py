"""Command-line entry points.

    austensim run <scenario.cfg> [--full-scale] [--out DIR]
    austensim oracle <scenario.cfg> [--out DIR]
    austensim equilibrium <material.cfg> --T <K> --C0 <wt%>
    austensim validate <suite>
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_material, parse_scenario
from .simulation import equilibrium_report, run_oracle, run_simulation
from .validation import SUITES, run_suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="austensim",
                                     description="diffusive austenite-decomposition simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a coupled level-set/diffusion scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--full-scale", action="store_true",
                       help="apply the scenario's [full_scale] overrides (long runtime)")
    p_run.add_argument("--out", default="out")

    p_orc = sub.add_parser("oracle", help="run the 1D sharp-interface model on a planar scenario")
    p_orc.add_argument("scenario")
    p_orc.add_argument("--out", default="out")

    p_eq = sub.add_parser("equilibrium", help="linearized equilibrium table at a temperature")
    p_eq.add_argument("material")
    p_eq.add_argument("--T", type=float, required=True, help="temperature (K)")
    p_eq.add_argument("--C0", type=float, required=True, help="overall carbon content (wt%%)")

    p_val = sub.add_parser("validate", help="run a named desk-scale property suite")
    p_val.add_argument("suite", choices=SUITES)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            scenario = parse_scenario(args.scenario, full_scale=args.full_scale)
            report = run_simulation(scenario, args.out, log=print)
            print(f"done in {report.steps} steps (t = {report.final_time:.4g} s, "
                  f"steady = {report.steady_reached})")
            print(f"ferrite fraction = {report.fraction_alpha:.5f}, "
                  f"plateau C_gamma = {report.c_gamma_plateau:.6g} wt%, "
                  f"C_alpha = {report.c_alpha_plateau:.6g} wt%")
            if report.interface_x == report.interface_x:  # 1D runs only
                print(f"interface position = {report.interface_x:.5f} um")
            print(f"max |mass drift| = {report.max_abs_drift:.3e}, outputs in {args.out}/")
        elif args.command == "oracle":
            scenario = parse_scenario(args.scenario)
            rows = run_oracle(scenario, args.out)
            last = rows[-1]
            print(f"oracle finished at t = {last[0]:.4g} s: interface = {last[2]:.5f} um, "
                  f"C_gamma_int = {last[3]:.6g} wt% (trajectory in {args.out}/)")
        elif args.command == "equilibrium":
            material = parse_material(args.material)
            rep = equilibrium_report(material, args.T, args.C0)
            print(f"T = {rep['T_k']} K (reference state at {rep['reference_T_k']} K)")
            print(f"c_alpha_eq = {rep['c_alpha_eq_wtpct']:.7g} wt%")
            print(f"c_gamma_eq = {rep['c_gamma_eq_wtpct']:.7g} wt%")
            print(f"partition ratio k = {rep['partition_ratio']:.7g}")
            print(f"lever-rule ferrite fraction at C0 = {rep['c0_wtpct']} wt%: "
                  f"f = {rep['ferrite_fraction']:.7g}")
        elif args.command == "validate":
            return 0 if run_suite(args.suite) else 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
