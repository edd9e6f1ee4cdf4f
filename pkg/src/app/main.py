"""
stratri - 命令行入口

    triangulate  <scene> -o <mesh>                      栈的弱双 Lipschitz 三角剖分
    qtriangulate <scene> --condition whitney-b -o <mesh> --report <json>
    check        <scene> --condition verdier --samples N --tol T --seed S
    subdivide    <mesh> -n k

退出码: 0 pass, 1 fail (带见证), 2 inconclusive, 3 输入错误
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

# 确保项目根目录在 Python 路径中
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.core.conditions import available_conditions, get_condition  # noqa: E402
from src.core.errors import (  # noqa: E402
    ConditionFailureError, InputError, PipelineStageError, StratriError,
)
from src.core.regularity import FAIL, INCONCLUSIVE, PASS, worst_verdict  # noqa: E402
from src.utils.config import PipelineConfig, default_log_level  # noqa: E402

logger = logging.getLogger("stratri")

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 3

EXIT_CODES = {PASS: EXIT_PASS, FAIL: EXIT_FAIL, INCONCLUSIVE: EXIT_INCONCLUSIVE}


def configure_logging(verbose: int = 0) -> None:
    if verbose >= 2:
        level = "DEBUG"
    elif verbose == 1:
        level = "INFO"
    else:
        level = default_log_level()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="[%(levelname)s] %(message)s",
                        force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stratri", description="Weakly bi-Lipschitz triangulation of stacks")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    def scene_command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scene", type=Path, help="scene JSON file")
        p.add_argument("--seed", type=int, default=None, help="overrides the scene and STRATRI_SEED")
        p.add_argument("--report", type=Path, default=None, help="write a JSON report")
        return p

    p = scene_command("triangulate", "triangulate a stack presentation")
    p.add_argument("-o", "--output", type=Path, required=True, help="mesh file (.json or .off)")
    p.add_argument("--format", choices=["json", "off"], default=None)
    p.add_argument("--subset", default=None, help="export only simplices of this subset")

    p = scene_command("qtriangulate", "Q-triangulate a stack for a regularity condition")
    p.add_argument("--condition", choices=available_conditions(), default=None)
    p.add_argument("-o", "--output", type=Path, required=True, help="mesh file (.json or .off)")
    p.add_argument("--format", choices=["json", "off"], default=None)

    p = scene_command("check", "run a regularity checker on a scene")
    p.add_argument("--condition", choices=available_conditions(), default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("subdivide", help="barycentric subdivision of a JSON mesh")
    p.add_argument("mesh", type=Path)
    p.add_argument("-n", "--times", type=int, default=1)
    p.add_argument("-o", "--output", type=Path, default=None)
    return parser


def _config(scene, args) -> PipelineConfig:
    """命令行参数 > 场景文件 > 环境变量 > 默认值"""
    config = scene.pipeline
    checker = config.checker
    updates: Dict = {}
    if getattr(args, "condition", None):
        updates["condition"] = args.condition
    if getattr(args, "tol", None) is not None:
        updates["tol"] = args.tol
    if getattr(args, "samples", None) is not None:
        updates["samples"] = args.samples
    if args.seed is not None:
        updates["scheme"] = checker.scheme.model_copy(update={"seed": args.seed})
        config = config.model_copy(update={
            "certificate_scheme": config.certificate_scheme.model_copy(update={"seed": args.seed})})
    if updates:
        checker = checker.model_copy(update=updates)
    return config.model_copy(update={"checker": checker})


def _finish(command: str, verdict: str, report: Dict, args) -> int:
    from src.utils.scene_io import write_report

    report = {"command": command, "verdict": verdict, **report}
    if args.report is not None:
        write_report(report, args.report)
    print(f"[{verdict.upper()}] {command}")
    return EXIT_CODES[verdict]


def cmd_triangulate(args) -> int:
    from src.generators.gen_full import FullGenerator
    from src.utils.mesh_export import export_mesh, mesh_from_triangulation
    from src.utils.scene_io import parse_scene

    scene = parse_scene(args.scene)
    config = _config(scene, args)
    tri = FullGenerator(config).triangulate(scene.stack, scene.subsets)
    cells = None if args.subset is None else scene.stack.subset_cells(args.subset)
    mesh = mesh_from_triangulation(tri, cells)
    export_mesh(mesh, args.output, args.format)
    return _finish("triangulate", tri.verdict, {
        "triangulation": tri.to_dict(),
        "mesh": {"vertices": len(mesh.vertices), "simplices": len(mesh.simplices)},
    }, args)


def cmd_qtriangulate(args) -> int:
    from src.generators.gen_full import FullGenerator
    from src.utils.mesh_export import export_mesh, mesh_from_q_triangulation
    from src.utils.scene_io import parse_scene

    scene = parse_scene(args.scene)
    config = _config(scene, args)
    try:
        q = FullGenerator(config).q_triangulate(scene.stack, scene.subsets, config.checker.condition)
    except PipelineStageError as e:
        if isinstance(e.cause, ConditionFailureError):
            return _finish("qtriangulate", FAIL, {
                "stage": e.stage,
                "error": str(e.cause),
                "reports": [r.to_dict() for r in e.cause.reports],
            }, args)
        raise
    mesh = mesh_from_q_triangulation(q)
    export_mesh(mesh, args.output, args.format)
    return _finish("qtriangulate", q.verdict, {
        "q_triangulation": q.to_dict(),
        "mesh": {"vertices": len(mesh.vertices), "simplices": len(mesh.simplices)},
    }, args)


def cmd_check(args) -> int:
    from src.generators.gen_full import FullGenerator
    from src.utils.scene_io import parse_scene

    scene = parse_scene(args.scene)
    config = _config(scene, args)
    condition = config.checker.condition
    if scene.pair is not None:
        reports = [get_condition(condition).check(scene.pair, None, config.checker)]
    else:
        reports = FullGenerator(config).check(scene.stack, condition)
    verdict = worst_verdict(r.verdict for r in reports)
    return _finish("check", verdict, {
        "condition": condition,
        "seed": config.checker.scheme.seed,
        "reports": [r.to_dict() for r in reports],
    }, args)


def cmd_subdivide(args) -> int:
    from src.utils.mesh_export import export_mesh, load_mesh, subdivide_mesh

    mesh = subdivide_mesh(load_mesh(args.mesh), args.times)
    output = args.output or args.mesh.with_name(f"{args.mesh.stem}.sub{args.times}.json")
    export_mesh(mesh, output, "json")
    print(f"[PASS] subdivide: {len(mesh.simplices)} simplices -> {output}")
    return EXIT_PASS


COMMANDS = {
    "triangulate": cmd_triangulate,
    "qtriangulate": cmd_qtriangulate,
    "check": cmd_check,
    "subdivide": cmd_subdivide,
}


def _exit_for(error: BaseException) -> int:
    if isinstance(error, PipelineStageError):
        return _exit_for(error.cause)
    return EXIT_INPUT if isinstance(error, InputError) else EXIT_FAIL


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except StratriError as e:
        code = _exit_for(e)
        logger.error("%s", e)
        suggestions = getattr(e, "diagnostics", None)
        if suggestions is not None:
            from src.core.defnfun import suggest_fixes
            for hint in suggest_fixes(suggestions):
                logger.error("  hint: %s", hint)
        print(f"[ERROR] {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
