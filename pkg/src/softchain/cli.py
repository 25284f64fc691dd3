"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime budget error.
"""

from __future__ import annotations

import csv
import functools
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import io as sio
from ._validation import check_gamma, check_positive_int
from .datagen import CONCEPT_LAYOUT, CONCEPTS, GenerationError, gen_clevr_hans, gen_concept_set, gen_kandinsky
from .grounding import DEFAULT_BUDGET, BudgetExceeded
from .logic import LogicError, parse_facts, parse_language, parse_rules
from .oracle import OracleError, label_scene
from .programs import CLEVR_PROGRAMS, KANDINSKY_PATTERNS, PROGRAMS, Program, load_program, load_program_dir, parse_targets
from .reasoner import DEFAULT_GAMMA
from .scenes import SceneError, add_noise, read_scenes, scene_to_tensor, write_scenes

EXIT_VALIDATION = 1
EXIT_BUDGET = 2


class CliError(click.ClickException):
    def __init__(self, message: str, code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.exit_code = code


def _guard(fn):
    """Map library exceptions onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (BudgetExceeded, GenerationError, OracleError) as exc:
            raise CliError(str(exc), EXIT_BUDGET) from exc
        except (LogicError, SceneError, sio.FormatError, ValueError, KeyError, OSError) as exc:
            raise CliError(str(exc), EXIT_VALIDATION) from exc

    return wrapper


def _program_options(fn):
    opts = [
        click.option("--program", "program_ref", default=None,
                     help=f"Bundled program ({', '.join(PROGRAMS)}) or a directory with language.txt/rules.pl."),
        click.option("--language", type=click.Path(exists=True, dir_okay=False), help="Language file."),
        click.option("--rules", type=click.Path(exists=True, dir_okay=False), help="Rules file."),
        click.option("--background", type=click.Path(exists=True, dir_okay=False), help="Background-knowledge file."),
        click.option("--targets", default=None, help="Target atoms, e.g. 'kp(img)' or 'kp1(img),kp2(img)'."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _load(program_ref, language, rules, background, targets, require_targets: bool = True) -> Program:
    if program_ref is None and (language is None or rules is None):
        raise CliError("pass --program, or both --language and --rules")
    if program_ref is not None:
        prog = load_program(program_ref) if program_ref in PROGRAMS else load_program_dir(program_ref)
        lang = prog.lang
    else:
        lang = parse_language(Path(language).read_text(encoding="utf-8"))
        prog = Program(Path(rules).stem, lang, (), (), ())
    if language is not None and program_ref is not None:
        lang = parse_language(Path(language).read_text(encoding="utf-8"))
        prog = replace(prog, lang=lang)
    if rules is not None:
        prog = replace(prog, clauses=tuple(parse_rules(Path(rules).read_text(encoding="utf-8"), lang)))
    if background is not None:
        prog = replace(prog, background=tuple(parse_facts(Path(background).read_text(encoding="utf-8"), lang)))
    if targets is not None:
        prog = replace(prog, targets=tuple(parse_targets(targets, lang)))
    if not prog.clauses:
        raise CliError("program has no clauses")
    if require_targets and not prog.targets:
        raise CliError("no target atoms: pass --targets")
    return prog


def _infer_options(fn):
    opts = [
        click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False),
                     help="Neural-predicate parameter file."),
        click.option("--scenes", "scenes_file", type=click.Path(exists=True, dir_okay=False), required=True,
                     help="Scene JSON-lines file."),
        click.option("--gamma", type=float, default=DEFAULT_GAMMA, show_default=True, help="Soft-or temperature."),
        click.option("--steps", type=int, default=None, help="Reasoning steps (default: stratification depth)."),
        click.option("--batch", type=int, default=None, help="Scenes per forward pass (default: all)."),
        click.option("--scope", type=click.Choice(["global", "row"]), default="global", show_default=True,
                     help="Soft-or normalization scope."),
        click.option("--noise", type=float, default=0.0, show_default=True, help="Perturb object tensors by this epsilon."),
        click.option("--seed", type=int, default=0, show_default=True, help="Noise seed."),
        click.option("--budget", type=int, default=DEFAULT_BUDGET, show_default=True, help="Index-tensor element budget."),
        click.option("--out", type=click.Path(dir_okay=False), default=None, help="Prediction CSV."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _run_inference(prog, params_file, scenes_file, gamma, steps, batch, scope, noise, seed, budget):
    from .pipeline import compile_bundle, infer_tensor, required_concepts

    check_gamma(gamma)
    check_positive_int(batch, "--batch", allow_none=True)
    check_positive_int(steps, "--steps", allow_none=True, minimum=0)
    params = sio.read_params(params_file) if params_file else {}
    missing = [c for c in required_concepts(prog.lang) if c not in params]
    if missing:
        raise CliError(f"no parameters for {', '.join(missing)}: run train-concept and pass --params")
    scenes = read_scenes(scenes_file)
    if not scenes:
        raise CliError(f"{scenes_file} holds no scenes")
    cp = compile_bundle(prog, gamma=gamma, steps=steps, scope=scope, budget=budget)
    Z = scene_to_tensor(scenes, prog.n_objects)
    if noise:
        Z = add_noise(Z, noise, seed, prog.layout)
    VT = infer_tensor(cp, Z, prog, params, batch)
    return cp, scenes, cp.predict(VT), VT


def _write_predictions(out, cp, pred):
    header = ["scene_id", *(str(t) for t in cp.targets), "label"]
    rows = sio.prediction_rows(pred.probabilities, pred.labels)
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([sio.format_cell(v) for v in row])
    else:
        sio.write_csv(out, header, rows)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Differentiable forward reasoning over object-centric scenes."""


@main.command("compile")
@_program_options
@click.option("--budget", type=int, default=DEFAULT_BUDGET, show_default=True, help="Index-tensor element budget.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Binary index file; atoms go to OUT.atoms.")
@_guard
def cmd_compile(program_ref, language, rules, background, targets, budget, out):
    """Ground a program and write its index tensor."""
    from .grounding import build_index_tensor, enumerate_ground_atoms

    prog = _load(program_ref, language, rules, background, targets, require_targets=False)
    table = enumerate_ground_atoms(prog.lang)
    index = build_index_tensor(prog.clauses, table, prog.lang, budget)
    sio.write_index(out, index, table)
    C, G, S, L = index.shape
    click.echo(f"C={C} G={G} S={S} L={L}")


@main.command("infer")
@_program_options
@_infer_options
@click.option("--dump", type=click.Path(dir_okay=False), default=None,
              help="Also write the final valuation tensor (scene x ground atom) as CSV.")
@_guard
def cmd_infer(program_ref, language, rules, background, targets, params_file, scenes_file, gamma, steps, batch,
              scope, noise, seed, budget, out, dump):
    """Write target probabilities and labels for every scene."""
    prog = _load(program_ref, language, rules, background, targets)
    cp, _, pred, VT = _run_inference(prog, params_file, scenes_file, gamma, steps, batch, scope, noise, seed,
                                     budget)
    _write_predictions(out, cp, pred)
    if dump is not None:
        sio.write_csv(dump, ["scene_id", *(str(a) for a in cp.table)], ([b, *row] for b, row in enumerate(VT)))


@main.command("classify")
@_program_options
@_infer_options
@_guard
def cmd_classify(program_ref, language, rules, background, targets, params_file, scenes_file, gamma, steps, batch,
                 scope, noise, seed, budget, out):
    """Predict labels and report accuracy against the scene labels."""
    prog = _load(program_ref, language, rules, background, targets)
    cp, scenes, pred, _ = _run_inference(prog, params_file, scenes_file, gamma, steps, batch, scope, noise, seed, budget)
    if out is not None:
        _write_predictions(out, cp, pred)
    y = np.array([s.label for s in scenes])
    click.echo(f"accuracy={float((pred.labels == y).mean()):.3f}")


@main.command("oracle")
@_program_options
@click.option("--scenes", "scenes_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Label CSV.")
@_guard
def cmd_oracle(program_ref, language, rules, background, targets, scenes_file, out):
    """Label scenes by exact forward chaining and report agreement with their stored labels."""
    prog = _load(program_ref, language, rules, background, targets)
    scenes = read_scenes(scenes_file)
    labels = [label_scene(s, prog.clauses, prog.lang, prog.targets, prog.background) for s in scenes]
    if out is not None:
        sio.write_csv(out, ["scene_id", "label"], ([i, y] for i, y in enumerate(labels)))
    agree = np.mean([y == s.label for y, s in zip(labels, scenes)]) if scenes else float("nan")
    click.echo(f"accuracy={agree:.3f}")


@main.command("gen")
@click.option("--pattern", required=True,
              type=click.Choice([*KANDINSKY_PATTERNS, *CLEVR_PROGRAMS.values()]), help="Scene family.")
@click.option("--pos", type=int, default=200, show_default=True, help="Positive Kandinsky scenes.")
@click.option("--neg", type=int, default=200, show_default=True, help="Negative Kandinsky scenes.")
@click.option("--per-class", type=int, default=150, show_default=True, help="CLEVR-Hans scenes per class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Scene JSON-lines file.")
@_guard
def cmd_gen(pattern, pos, neg, per_class, seed, out):
    """Generate oracle-labelled scenes."""
    if pattern in KANDINSKY_PATTERNS:
        scenes = gen_kandinsky(pattern, pos, neg, seed)
    else:
        variant = next(v for v, n in CLEVR_PROGRAMS.items() if n == pattern)
        scenes = gen_clevr_hans(variant, per_class, seed)
    write_scenes(scenes, out)
    click.echo(f"wrote {len(scenes)} scenes to {out}")


@main.command("train-concept")
@click.option("--concept", "concepts", multiple=True, required=True, type=click.Choice(sorted(CONCEPTS)),
              help="Concept to fit (repeatable).")
@click.option("--n", "n_per_class", type=int, default=1000, show_default=True, help="Training examples per class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Parameter file; existing entries for other concepts are kept.")
@_guard
def cmd_train_concept(concepts, n_per_class, seed, out):
    """Fit neural-predicate parameters on synthetic concept examples."""
    from .concepts import ConceptClassifier

    check_positive_int(n_per_class, "--n")
    params = sio.read_params(out) if Path(out).exists() else {}
    for name in concepts:
        X, y = gen_concept_set(name, n_per_class, seed)
        Xt, yt = gen_concept_set(name, max(n_per_class // 2, 1), seed + 10_000)
        clf = ConceptClassifier(name, CONCEPT_LAYOUT[name], random_state=seed).fit(X, y)
        params[name] = clf.params_
        click.echo(f"{name} held_out_accuracy={clf.score(Xt, yt):.3f}")
    sio.write_params(out, params)


@main.command("gradcheck")
@click.option("--instances", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--gamma", type=float, default=DEFAULT_GAMMA, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Per-coordinate CSV report.")
@_guard
def cmd_gradcheck(instances, seed, gamma, out):
    """Compare dual-number and finite-difference derivatives on random instances."""
    from .gradcheck import TOLERANCE, run_gradcheck

    check_gamma(gamma)
    check_positive_int(instances, "--instances")
    report = run_gradcheck(instances, seed, gamma)
    if out is not None:
        sio.write_csv(out, ["instance", "kind", "coordinate", "dual", "finite_difference", "rel_error"],
                      ([i, k, ":".join(map(str, c)), a, b, r] for i, k, c, a, b, r in report.rows))
    click.echo(f"coordinates={report.n_coordinates} max_rel_error={report.max_rel_error:.3e}")
    if not report.passed:
        inst, kind, coord = report.worst
        raise CliError(f"gradient check failed (> {TOLERANCE:g}) at instance {inst}, {kind}{list(coord)}")
    click.echo("gradcheck=pass")


@main.command("bench")
@_program_options
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenes", "scenes_file", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Scene file (default: 50 generated scenes).")
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--gamma", type=float, default=DEFAULT_GAMMA, show_default=True)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Timing CSV.")
@_guard
def cmd_bench(program_ref, language, rules, background, targets, params_file, scenes_file, repeats, gamma, steps,
              seed, out):
    """Time inference for batch sizes 1, 5, ..., 50 (compilation excluded)."""
    from .bench import BATCH_SIZES, MIN_REPEATS, bench
    from .pipeline import compile_bundle, fit_concepts, required_concepts

    check_gamma(gamma)
    check_positive_int(repeats, "--repeats", minimum=MIN_REPEATS)
    prog = _load(program_ref, language, rules, background, targets)
    if scenes_file:
        scenes = read_scenes(scenes_file)
    elif prog.dataset == "kandinsky" and prog.name in KANDINSKY_PATTERNS:
        scenes = gen_kandinsky(prog.name, 25, 25, seed)
    elif prog.name in CLEVR_PROGRAMS.values():
        variant = next(v for v, n in CLEVR_PROGRAMS.items() if n == prog.name)
        scenes = gen_clevr_hans(variant, -(-50 // variant), seed)
    else:
        raise CliError("pass --scenes for a custom program")
    if len(scenes) < max(BATCH_SIZES):
        raise CliError(f"need at least {max(BATCH_SIZES)} scenes, got {len(scenes)}")
    needed = required_concepts(prog.lang)
    params = sio.read_params(params_file) if params_file else {}
    if any(c not in params for c in needed):
        params.update(fit_concepts([c for c in needed if c not in params], seed=seed))
    cp = compile_bundle(prog, gamma=gamma, steps=steps)
    rows = bench(cp, prog, scene_to_tensor(scenes, prog.n_objects), params, repeats=repeats)
    header = ["batch", "mean_ms", "std_ms", "per_example_ms"]
    data = [[r.batch, r.mean_ms, r.std_ms, r.per_example_ms] for r in rows]
    if out is None:
        click.echo(",".join(header))
        for r in data:
            click.echo(f"{r[0]},{r[1]:.4f},{r[2]:.4f},{r[3]:.4f}")
    else:
        sio.write_csv(out, header, data)


if __name__ == "__main__":
    main()
