"""The four screening experiments, each writing a self-contained run directory.

Every run persists its fully-resolved configuration (``spec.json``), its fold
plan or holdout split, per-fold out-of-fold predictions, and a report in both
machine (``report.json``) and human (``report.txt``) form. Given the same
spec and seed a rerun writes byte-identical files.

  reduce-compare  four reduction methods on one holdout split, 3-component
                  point clouds for train and test plus a separability index
  cellsize        descriptor cell sizes {4, 8, 16, 32} under one shared fold
                  plan; per-size score summaries and paired comparisons
  soa             two- and three-class configurations, fold-averaged rates
  early           out-of-fold COVID detection grouped by disease stage, with
                  a one-way ANOVA across stages
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .classifier import SvmConfig, fit_multiclass, predict
from .dataset import (CLASS_ORDER, ClassLabel, CovidStage, FoldPlan, Manifest,
                      balance_subsample, holdout_split, load_manifest, stage_of,
                      stratified_kfold)
from .descriptor import FeatureMatrix, HogConfig, extract_features
from .evalstats import (ComparisonResult, ScoreSummary, Scores, confusion,
                        fold_summary, format_rate_row, oneway_anova,
                        paired_compare, render_anova, render_comparison_table,
                        render_summary_table, scores)
from .kernels import KernelSpec
from .reduce import (LabeledMatrix, fit_dcv, fit_kpca, fit_lda, fit_pca, project,
                     separability_index, top_components)

EXPERIMENT_NAMES = ("reduce-compare", "cellsize", "soa", "early")

#: Class configurations reported against reference screening results.
CLASS_CONFIGS = {
    "CovidVsNormal": (ClassLabel.COVID19, ClassLabel.NORMAL),
    "CovidVsPneumonia": (ClassLabel.COVID19, ClassLabel.PNEUMONIA),
    "CovidVsPneumoniaVsNormal": (ClassLabel.COVID19, ClassLabel.PNEUMONIA,
                                 ClassLabel.NORMAL),
}

_CONFIG_DISPLAY = {
    "CovidVsNormal": "COVID-19/Normal",
    "CovidVsPneumonia": "COVID-19/Pneumonia",
    "CovidVsPneumoniaVsNormal": "COVID-19/Pneumonia/Normal",
}


class SpecValidationError(Exception):
    """Carries per-field diagnostics for an invalid experiment spec."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


def default_cell_size(experiment: str) -> int:
    return 4 if experiment == "reduce-compare" else 16


@dataclass
class ExperimentSpec:
    experiment: str
    manifest_path: Path
    out_dir: Path
    seed: int
    image_size: int = 400
    n_bins: int = 9
    cell_size: int | None = None  # None resolves per experiment (4 or 16)
    cell_sizes: tuple[int, ...] = (4, 8, 16, 32)
    train_fraction: float = 0.6
    k: int = 10
    dcv_fraction: float = 0.8
    dcv_exact_null: bool = False
    pca_variance_kept: float = 0.99
    kpca_components: int = 3
    kpca_kernel: KernelSpec = KernelSpec("rbf")
    lda_regularization: float = 1e-4
    svm: SvmConfig = SvmConfig()
    per_class: int | None = None
    positive_class: ClassLabel = ClassLabel.COVID19
    jobs: int = 1

    def __post_init__(self):
        self.manifest_path = Path(self.manifest_path)
        self.out_dir = Path(self.out_dir)
        if self.cell_size is None:
            self.cell_size = default_cell_size(self.experiment)

    def validate(self) -> None:
        issues = []
        if self.experiment not in EXPERIMENT_NAMES:
            issues.append(f"experiment: unknown name {self.experiment!r}, "
                          f"expected one of {EXPERIMENT_NAMES}")
        if self.seed is None:
            issues.append("seed: required, no wall-clock default")
        elif not 0 <= int(self.seed) < 2 ** 64:
            issues.append("seed: must be an unsigned 64-bit integer")
        if not self.manifest_path.is_file():
            issues.append(f"manifest: file not found: {self.manifest_path}")
        if self.image_size < 1:
            issues.append("image_size: must be >= 1")
        if not 1 <= self.cell_size <= self.image_size:
            issues.append(f"cell_size: {self.cell_size} must fit at least one "
                          f"full cell in image_size {self.image_size}")
        for cs in self.cell_sizes:
            if not 1 <= cs <= self.image_size:
                issues.append(f"cell_sizes: {cs} must fit at least one full "
                              f"cell in image_size {self.image_size}")
        if self.n_bins < 2:
            issues.append("n_bins: must be >= 2")
        if not 0.0 < self.train_fraction < 1.0:
            issues.append("train_fraction: must lie strictly between 0 and 1")
        if self.k < 2:
            issues.append("k: must be >= 2")
        if not 0.0 < self.dcv_fraction < 1.0:
            issues.append("dcv_fraction: must lie strictly between 0 and 1")
        if not 0.0 < self.pca_variance_kept <= 1.0:
            issues.append("pca_variance_kept: must lie in (0, 1]")
        if self.kpca_components < 1:
            issues.append("kpca_components: must be >= 1")
        if self.lda_regularization < 0.0:
            issues.append("lda_regularization: must be >= 0")
        if self.per_class is not None and self.per_class < 1:
            issues.append("per_class: must be >= 1 when given")
        if self.jobs < 1:
            issues.append("jobs: must be >= 1")
        if issues:
            raise SpecValidationError(issues)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "manifest": str(self.manifest_path),
            "out": str(self.out_dir),
            "seed": self.seed,
            "image_size": self.image_size,
            "n_bins": self.n_bins,
            "cell_size": self.cell_size,
            "cell_sizes": list(self.cell_sizes),
            "train_fraction": self.train_fraction,
            "k": self.k,
            "dcv_fraction": self.dcv_fraction,
            "dcv_exact_null": self.dcv_exact_null,
            "pca_variance_kept": self.pca_variance_kept,
            "kpca_components": self.kpca_components,
            "kpca_kernel": self.kpca_kernel.to_dict(),
            "lda_regularization": self.lda_regularization,
            "svm": self.svm.to_dict(),
            "per_class": self.per_class,
            "positive_class": self.positive_class.value,
            "jobs": self.jobs,
        }

    _KEYS = ("experiment", "manifest", "out", "seed", "image_size", "n_bins",
             "cell_size", "cell_sizes", "train_fraction", "k", "dcv_fraction",
             "dcv_exact_null", "pca_variance_kept", "kpca_components",
             "kpca_kernel", "lda_regularization", "svm", "per_class",
             "positive_class", "jobs")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        issues = [f"{key}: unknown field" for key in d if key not in cls._KEYS]
        for required in ("experiment", "manifest", "out", "seed"):
            if d.get(required) is None:
                issues.append(f"{required}: required")
        if issues:
            raise SpecValidationError(issues)
        kwargs = dict(
            experiment=d["experiment"],
            manifest_path=Path(d["manifest"]),
            out_dir=Path(d["out"]),
            seed=int(d["seed"]),
        )
        try:
            if "image_size" in d:
                kwargs["image_size"] = int(d["image_size"])
            if "n_bins" in d:
                kwargs["n_bins"] = int(d["n_bins"])
            if d.get("cell_size") is not None:
                kwargs["cell_size"] = int(d["cell_size"])
            if "cell_sizes" in d:
                kwargs["cell_sizes"] = tuple(int(c) for c in d["cell_sizes"])
            if "train_fraction" in d:
                kwargs["train_fraction"] = float(d["train_fraction"])
            if "k" in d:
                kwargs["k"] = int(d["k"])
            if "dcv_fraction" in d:
                kwargs["dcv_fraction"] = float(d["dcv_fraction"])
            if "dcv_exact_null" in d:
                kwargs["dcv_exact_null"] = bool(d["dcv_exact_null"])
            if "pca_variance_kept" in d:
                kwargs["pca_variance_kept"] = float(d["pca_variance_kept"])
            if "kpca_components" in d:
                kwargs["kpca_components"] = int(d["kpca_components"])
            if "kpca_kernel" in d:
                kwargs["kpca_kernel"] = KernelSpec.from_dict(d["kpca_kernel"])
            if "lda_regularization" in d:
                kwargs["lda_regularization"] = float(d["lda_regularization"])
            if "svm" in d:
                kwargs["svm"] = SvmConfig.from_dict(d["svm"])
            if d.get("per_class") is not None:
                kwargs["per_class"] = int(d["per_class"])
            if "positive_class" in d:
                kwargs["positive_class"] = ClassLabel(d["positive_class"])
        except (TypeError, ValueError, KeyError) as exc:
            raise SpecValidationError([f"spec field parse error: {exc}"]) from exc
        if "jobs" in d:
            kwargs["jobs"] = int(d["jobs"])
        return cls(**kwargs)


@dataclass
class FoldPrediction:
    fold: int
    sample_ids: list[str]
    y_true: list[ClassLabel]
    y_pred: list[ClassLabel]


def kfold_cross_validate(features: FeatureMatrix, plan: FoldPlan,
                         dcv_fraction: float = 0.8, dcv_exact_null: bool = False,
                         svm_config: SvmConfig = SvmConfig()) -> list[FoldPrediction]:
    """DCV + one-vs-one SVM over every fold; out-of-fold predictions per fold."""
    out = []
    for fold in range(plan.k):
        train_fm = features.select(plan.train_ids(fold))
        test_fm = features.select(plan.test_ids(fold))
        model = fit_dcv(LabeledMatrix.from_features(train_fm),
                        variance_fraction=dcv_fraction, exact_null=dcv_exact_null)
        svm = fit_multiclass(LabeledMatrix(rows=model.fitted, labels=train_fm.labels),
                             svm_config)
        preds = predict(svm, project(model, test_fm.values))
        out.append(FoldPrediction(fold=fold, sample_ids=test_fm.sample_ids,
                                  y_true=list(test_fm.labels), y_pred=list(preds)))
    return out


def _load_run_manifest(spec: ExperimentSpec) -> Manifest:
    manifest = load_manifest(spec.manifest_path)
    if spec.per_class is not None:
        manifest = balance_subsample(manifest, spec.per_class, spec.seed)
    return manifest


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _write_spec(spec: ExperimentSpec) -> None:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(spec.out_dir / "spec.json", spec.to_dict())


def _write_predictions(path: Path, fp: FoldPrediction) -> None:
    rows = sorted(zip(fp.sample_ids, fp.y_true, fp.y_pred), key=lambda r: r[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "true", "pred"])
        for sid, t, p in rows:
            writer.writerow([sid, t.value, p.value])


def _fold_score_lists(fold_preds: list[FoldPrediction], positive: ClassLabel
                      ) -> dict[str, list[float | None]]:
    by_score: dict[str, list[float | None]] = {
        "accuracy": [], "recall": [], "specificity": [], "precision": []}
    for fp in fold_preds:
        sc = scores(confusion(fp.y_true, fp.y_pred, positive))
        for name in by_score:
            by_score[name].append(getattr(sc, name))
    return by_score


def _summary_over_defined(values: list[float | None], name: str
                          ) -> tuple[ScoreSummary | None, list[int]]:
    undefined = [i for i, v in enumerate(values) if v is None]
    defined = [v for v in values if v is not None]
    if len(defined) < 2:
        return None, undefined
    return fold_summary(defined, score_name=name), undefined


# --- experiment 1: reduction comparison -------------------------------------

_REDUCERS = ("pca", "kpca", "lda", "dcv")


@dataclass
class ReductionCompareResult:
    methods: dict
    train_ids: list[str]
    test_ids: list[str]


def run_reduction_compare(spec: ExperimentSpec) -> ReductionCompareResult:
    spec = replace(spec, experiment="reduce-compare")
    spec.validate()
    manifest = _load_run_manifest(spec)
    present = set(manifest.class_counts())
    if present != set(CLASS_ORDER):
        raise SpecValidationError(
            [f"manifest: reduce-compare needs all four classes, found "
             f"{sorted(c.value for c in present)}"])
    _write_spec(spec)

    train_m, test_m = holdout_split(manifest, spec.train_fraction, spec.seed)
    config = HogConfig(cell_size=spec.cell_size, n_bins=spec.n_bins)
    features = extract_features(manifest, config, spec.image_size, spec.jobs)
    train_fm = features.select([e.sample_id for e in train_m])
    test_fm = features.select([e.sample_id for e in test_m])
    train_lm = LabeledMatrix.from_features(train_fm)

    with open(spec.out_dir / "split.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "split"])
        split_of = {e.sample_id: "train" for e in train_m}
        split_of.update({e.sample_id: "test" for e in test_m})
        for sid in sorted(split_of):
            writer.writerow([sid, split_of[sid]])

    methods = {}
    for name in _REDUCERS:
        if name == "pca":
            model = fit_pca(train_lm, variance_kept=spec.pca_variance_kept)
        elif name == "kpca":
            model = fit_kpca(train_lm, kernel=spec.kpca_kernel,
                             n_components=spec.kpca_components)
        elif name == "lda":
            model = fit_lda(train_lm, regularization=spec.lda_regularization)
        else:
            model = fit_dcv(train_lm, variance_fraction=spec.dcv_fraction,
                            exact_null=spec.dcv_exact_null)
        emb_train = LabeledMatrix(rows=model.fitted, labels=train_fm.labels,
                                  sample_ids=train_fm.sample_ids)
        emb_test = LabeledMatrix(rows=project(model, test_fm.values),
                                 labels=test_fm.labels, sample_ids=test_fm.sample_ids)
        cloud = top_components(model, emb_train, emb_test, n=3)
        cloud.save_csv(spec.out_dir / f"pointcloud_{name}_train.csv", split="train")
        cloud.save_csv(spec.out_dir / f"pointcloud_{name}_test.csv", split="test")
        nc = cloud.n_components
        sep_train = separability_index(emb_train.rows[:, :nc], emb_train.labels)
        sep_test = separability_index(emb_test.rows[:, :nc], emb_test.labels)
        methods[name] = {
            "output_dim": model.output_dim,
            "components_exported": nc,
            "separability_train": sep_train,
            "separability_test": sep_test,
            "warnings": cloud.warnings,
        }

    report = {
        "experiment": "reduce-compare",
        "n_train": len(train_m),
        "n_test": len(test_m),
        "methods": methods,
    }
    _write_json(spec.out_dir / "report.json", report)
    lines = ["Reduction comparison (3-component separability)",
             "------------------------------------------------",
             f"{'method':<6}  {'dim':>3}  {'sep(train)':>10}  {'sep(test)':>9}"]
    for name, info in methods.items():
        lines.append(f"{name:<6}  {info['output_dim']:>3}  "
                     f"{info['separability_train']:>10.4f}  "
                     f"{info['separability_test']:>9.4f}")
    _write_text(spec.out_dir / "report.txt", "\n".join(lines))
    return ReductionCompareResult(methods=methods,
                                  train_ids=[e.sample_id for e in train_m],
                                  test_ids=[e.sample_id for e in test_m])


# --- experiment 2: descriptor cell-size sweep --------------------------------

@dataclass
class CellSizeSweepResult:
    summaries: list[ScoreSummary]
    comparisons: list[ComparisonResult]
    fold_scores: dict  # cell size -> {"precision": [...], "recall": [...]}
    undefined: dict


def run_cellsize_sweep(spec: ExperimentSpec) -> CellSizeSweepResult:
    spec = replace(spec, experiment="cellsize")
    spec.validate()
    manifest = _load_run_manifest(spec)
    _write_spec(spec)

    # One fold plan shared by every cell size, so comparisons pair up folds.
    plan = stratified_kfold(manifest, spec.k, spec.seed)
    plan.save_csv(spec.out_dir / "folds.csv")

    fold_scores: dict[int, dict[str, list]] = {}
    undefined: dict[str, list[int]] = {}
    for size in spec.cell_sizes:
        config = HogConfig(cell_size=size, n_bins=spec.n_bins)
        features = extract_features(manifest, config, spec.image_size, spec.jobs)
        preds = kfold_cross_validate(features, plan, spec.dcv_fraction,
                                     spec.dcv_exact_null, spec.svm)
        for fp in preds:
            _write_predictions(
                spec.out_dir / f"predictions_cell{size}_fold{fp.fold}.csv", fp)
        lists = _fold_score_lists(preds, spec.positive_class)
        fold_scores[size] = {"precision": lists["precision"],
                             "recall": lists["recall"]}

    summaries: list[ScoreSummary] = []
    for size in spec.cell_sizes:
        for score in ("precision", "recall"):
            summary, undef = _summary_over_defined(
                fold_scores[size][score], f"cell{size} {score}")
            if summary is not None:
                summaries.append(summary)
            if undef:
                undefined[f"cell{size} {score}"] = undef

    comparisons: list[ComparisonResult] = []
    for a, b in combinations(spec.cell_sizes, 2):
        for score in ("precision", "recall"):
            va, vb = fold_scores[a][score], fold_scores[b][score]
            keep = [i for i in range(len(va)) if va[i] is not None and vb[i] is not None]
            if len(keep) < 2:
                undefined[f"cell{a}-cell{b} {score}"] = ["comparison skipped"]
                continue
            comparisons.append(paired_compare([va[i] for i in keep],
                                              [vb[i] for i in keep],
                                              pair=(f"cell{a} {score}", f"cell{b} {score}")))

    report = {
        "experiment": "cellsize",
        "cell_sizes": list(spec.cell_sizes),
        "k": spec.k,
        "summaries": [s.to_dict() for s in summaries],
        "comparisons": [c.to_dict() for c in comparisons],
        "undefined_folds": undefined,
    }
    _write_json(spec.out_dir / "report.json", report)
    text = (render_summary_table(summaries, "Average scores per cell size")
            + "\n\n" + render_comparison_table(comparisons,
                                               "Comparison across cell sizes"))
    _write_text(spec.out_dir / "report.txt", text)
    return CellSizeSweepResult(summaries=summaries, comparisons=comparisons,
                               fold_scores=fold_scores, undefined=undefined)


# --- experiment 3: class-configuration rates ---------------------------------

@dataclass
class SoaResult:
    rows: dict  # config name -> score info


def run_soa_configs(spec: ExperimentSpec) -> SoaResult:
    spec = replace(spec, experiment="soa")
    spec.validate()
    manifest = _load_run_manifest(spec)
    _write_spec(spec)
    config = HogConfig(cell_size=spec.cell_size, n_bins=spec.n_bins)
    features = extract_features(manifest, config, spec.image_size, spec.jobs)

    rows = {}
    table_lines = ["Screening rates (accuracy, recall, specificity, precision; "
                   "fold averages, percent)",
                   "-" * 78]
    for name, labels in CLASS_CONFIGS.items():
        sub = manifest.restrict(labels)
        plan = stratified_kfold(sub, spec.k, spec.seed)
        plan.save_csv(spec.out_dir / f"folds_{name}.csv")
        sub_features = features.select([e.sample_id for e in sub])
        preds = kfold_cross_validate(sub_features, plan, spec.dcv_fraction,
                                     spec.dcv_exact_null, spec.svm)
        for fp in preds:
            _write_predictions(spec.out_dir / f"predictions_{name}_fold{fp.fold}.csv", fp)
        lists = _fold_score_lists(preds, spec.positive_class)
        means = {}
        undefined = {}
        for score, values in lists.items():
            defined = [v for v in values if v is not None]
            undef = [i for i, v in enumerate(values) if v is None]
            means[score] = sum(defined) / len(defined) if defined else None
            if undef:
                undefined[score] = undef
        agg_cm = None
        for fp in preds:
            cm = confusion(fp.y_true, fp.y_pred, spec.positive_class)
            agg_cm = cm if agg_cm is None else agg_cm + cm
        mean_scores = Scores(precision=means["precision"], recall=means["recall"],
                             specificity=means["specificity"], accuracy=means["accuracy"])
        rows[name] = {
            "fold_scores": lists,
            "fold_means": means,
            "aggregate": scores(agg_cm).to_dict(),
            "undefined_folds": undefined,
        }
        table_lines.append(format_rate_row(_CONFIG_DISPLAY[name], mean_scores))

    report = {"experiment": "soa", "k": spec.k, "cell_size": spec.cell_size,
              "rows": rows}
    _write_json(spec.out_dir / "report.json", report)
    _write_text(spec.out_dir / "report.txt", "\n".join(table_lines))
    return SoaResult(rows=rows)


# --- experiment 4: early-detection staging -----------------------------------

@dataclass
class EarlyDetectionResult:
    stage_sizes: dict
    stage_rates: dict
    excluded_no_offset: list[str]
    anova: object | None
    notice: str | None


def run_early_detection(spec: ExperimentSpec) -> EarlyDetectionResult:
    spec = replace(spec, experiment="early")
    spec.validate()
    manifest = _load_run_manifest(spec)
    _write_spec(spec)
    config = HogConfig(cell_size=spec.cell_size, n_bins=spec.n_bins)
    features = extract_features(manifest, config, spec.image_size, spec.jobs)

    plan = stratified_kfold(manifest, spec.k, spec.seed)
    plan.save_csv(spec.out_dir / "folds.csv")
    preds = kfold_cross_validate(features, plan, spec.dcv_fraction,
                                 spec.dcv_exact_null, spec.svm)
    for fp in preds:
        _write_predictions(spec.out_dir / f"predictions_fold{fp.fold}.csv", fp)

    offset_of = {e.sample_id: e.offset_days for e in manifest}
    detected: dict[CovidStage, list[bool]] = {s: [] for s in CovidStage}
    excluded: list[str] = []
    for fp in preds:
        for sid, t, p in zip(fp.sample_ids, fp.y_true, fp.y_pred):
            if t is not spec.positive_class:
                continue
            offset = offset_of[sid]
            if offset is None:
                excluded.append(sid)
                continue
            detected[stage_of(offset)].append(p is spec.positive_class)
    excluded.sort()

    stage_sizes = {s.value: len(detected[s]) for s in CovidStage}
    stage_rates = {s.value: (float(np.mean(detected[s])) if detected[s] else None)
                   for s in CovidStage}

    anova = None
    notice = None
    small = [s.value for s in CovidStage if len(detected[s]) < 2]
    if not any(detected[s] for s in CovidStage):
        notice = "no staged COVID samples: no positive sample carries an offset"
    elif small:
        notice = (f"ANOVA skipped: stage group(s) with fewer than 2 samples: "
                  f"{', '.join(small)}")
    else:
        anova = oneway_anova([detected[s] for s in CovidStage],
                             names=[s.value for s in CovidStage])

    report = {
        "experiment": "early",
        "stage_sizes": stage_sizes,
        "stage_rates": stage_rates,
        "excluded_no_offset": excluded,
        "anova": anova.to_dict() if anova else None,
        "notice": notice,
    }
    _write_json(spec.out_dir / "report.json", report)
    lines = ["Early-detection rates by stage",
             "------------------------------"]
    for s in CovidStage:
        rate = stage_rates[s.value]
        rate_txt = "NA" if rate is None else f"{rate * 100:.0f}%"
        lines.append(f"{s.value}: n={stage_sizes[s.value]}, detected {rate_txt}")
    if excluded:
        lines.append(f"excluded (no offset recorded): {', '.join(excluded)}")
    lines.append("")
    lines.append(notice if notice else render_anova(anova, "Detection rate ANOVA"))
    _write_text(spec.out_dir / "report.txt", "\n".join(lines))
    return EarlyDetectionResult(stage_sizes=stage_sizes, stage_rates=stage_rates,
                                excluded_no_offset=excluded, anova=anova,
                                notice=notice)


RUNNERS = {
    "reduce-compare": run_reduction_compare,
    "cellsize": run_cellsize_sweep,
    "soa": run_soa_configs,
    "early": run_early_detection,
}


def run_experiment(spec: ExperimentSpec):
    """Dispatch on ``spec.experiment``; see the per-experiment runners."""
    if spec.experiment not in RUNNERS:
        raise SpecValidationError(
            [f"experiment: unknown name {spec.experiment!r}, "
             f"expected one of {EXPERIMENT_NAMES}"])
    return RUNNERS[spec.experiment](spec)
