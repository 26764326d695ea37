"""Command-line pipeline: simulate/load -> DTW -> train -> embed -> cluster -> evaluate.

Every stage writes its artifacts into the output directory and records them
in ``manifest.json`` together with the hash of the configuration sections
they depend on. Later stages refuse artifacts whose hash does not match the
current configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from rogue_sensors import clustering, data, dtw, encoder, evaluation, sampler, simgen, training
from rogue_sensors.config import PipelineConfig, load_config
from rogue_sensors.errors import ConfigError, DataError, MissingArtifactError, RogueSensorError

log = logging.getLogger("rogue_sensors")

STAGES = ("simulate", "dtw", "train", "embed", "cluster", "eval")
MANIFEST = "manifest.json"

# artifact -> stage that produces it
PRODUCER = {
    "data.csv": "simulate",
    "ground_truth.csv": "simulate",
    "dtw_matrix.npy": "dtw",
    "encoder.bin": "train",
    "train_log.csv": "train",
    "embeddings.csv": "embed",
    "labels.csv": "cluster",
    "k_distance.csv": "cluster",
    "epsilon.json": "cluster",
    "embeddings.png": "cluster",
    "report.json": "eval",
}


class Run:
    """Output directory plus manifest bookkeeping for one configuration."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / MANIFEST
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        else:
            self.manifest = {"artifacts": {}}

    def path(self, name: str) -> Path:
        return self.out / name

    def record(self, name: str, stage: str) -> None:
        digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        self.manifest["artifacts"][name] = {
            "stage": stage,
            "config_hash": self.cfg.section_hash(stage),
            "sha256": digest,
        }
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")

    def require(self, name: str) -> Path:
        """Path of an upstream artifact, checked against the current configuration."""
        stage = PRODUCER[name]
        entry = self.manifest["artifacts"].get(name)
        p = self.path(name)
        if entry is None or not p.exists():
            raise MissingArtifactError(f"missing {name} in {self.out}; run the `{stage}` stage first")
        if entry["config_hash"] != self.cfg.section_hash(stage):
            raise ConfigError(
                f"{name} was produced from a different configuration; rerun the `{stage}` stage"
            )
        return p


@contextmanager
def lockfile(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{out} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _dataset(run: Run) -> data.Dataset:
    cfg = run.cfg
    if cfg.is_simulated:
        raw = data.read_dataset(run.require("data.csv"))
    else:
        raw = data.load_csv(cfg.data.input)
    return data.normalize(raw, scale=cfg.data.scale)


def _ground_truth(run: Run) -> dict[str, str] | None:
    if run.cfg.is_simulated:
        return simgen.read_ground_truth(run.require("ground_truth.csv"))
    if run.cfg.data.ground_truth:
        return simgen.read_ground_truth(run.cfg.data.ground_truth)
    return None


def stage_simulate(run: Run) -> None:
    sim = run.cfg.sim_config()
    if sim is None:
        raise ConfigError("`simulate` needs a data.simgen section")
    raw, labels = simgen.generate(sim)
    data.save_dataset(raw, run.path("data.csv"))
    simgen.write_ground_truth(raw.sensor_ids, labels, run.path("ground_truth.csv"))
    run.record("data.csv", "simulate")
    run.record("ground_truth.csv", "simulate")
    log.info("simulated %d sensors x %d steps", len(raw), sim.length)


def stage_dtw(run: Run) -> np.ndarray:
    d = _dataset(run)
    opts = run.cfg.dtw
    m, hit = dtw.cached_dtw_matrix(d, run.path("dtw_matrix.npy"), band=opts.band, squared=opts.squared)
    if not hit:
        log.info("dtw: computed %dx%d matrix", *m.shape)
    run.record("dtw_matrix.npy", "dtw")
    return m


def _matrix(run: Run, d: data.Dataset) -> np.ndarray:
    opts = run.cfg.dtw
    m = dtw.load_cached_matrix(
        run.require("dtw_matrix.npy"), d.content_hash(), {"band": opts.band, "squared": opts.squared}
    )
    if m is None:
        raise MissingArtifactError("dtw_matrix.npy does not match the dataset; run the `dtw` stage first")
    return m


def stage_train(run: Run) -> None:
    cfg = run.cfg
    d = _dataset(run)
    tcfg = cfg.train_config()
    m = _matrix(run, d) if tcfg.negative_mode == "dtw" else None
    dumped: list = []
    hook = (lambda step, trips: dumped.extend((step, t) for t in trips)) if cfg.output.dump_triplets else None
    params, tlog = training.train(d, m, cfg.encoder_config(), tcfg, on_step=hook)
    encoder.save_checkpoint(params, run.path("encoder.bin"))
    tlog.write_csv(run.path("train_log.csv"))
    run.record("encoder.bin", "train")
    run.record("train_log.csv", "train")
    if cfg.output.timings:
        tlog.write_csv(run.path("timings.csv"), timings=True)
    if cfg.output.dump_triplets:
        sampler.write_triplets_csv(dumped, run.path("triplets.csv"))
    log.info("train: %d steps, final loss %.4f", len(tlog.records), tlog.records[-1].loss)


def stage_embed(run: Run) -> None:
    d = _dataset(run)
    params = encoder.load_checkpoint(run.require("encoder.bin"))
    z = encoder.embed_all(params, d)
    with run.path("embeddings.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id"] + [f"z{k + 1}" for k in range(z.shape[1])])
        for sid, row in zip(d.sensor_ids, z):
            w.writerow([sid] + [repr(float(v)) for v in row])
    run.record("embeddings.csv", "embed")


def read_embeddings(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return [r[0] for r in rows], np.array([[float(v) for v in r[1:]] for r in rows])


def stage_cluster(run: Run) -> None:
    opts = run.cfg.clustering
    ids, z = read_embeddings(run.require("embeddings.csv"))
    curve = clustering.k_distance_curve(z, opts.min_pts)
    clustering.write_k_distance_csv(curve, run.path("k_distance.csv"))
    run.record("k_distance.csv", "cluster")
    if opts.epsilon is not None:
        eps, source = float(opts.epsilon), "override"
    else:
        eps, source = clustering.select_epsilon(z, opts.min_pts, opts.sensitivity), "knee"
    res = clustering.dbscan(z, clustering.DbscanParams(eps, opts.min_pts))
    run.path("epsilon.json").write_text(
        json.dumps({"epsilon": eps, "source": source, "min_pts": opts.min_pts}, indent=2, sort_keys=True) + "\n"
    )
    with run.path("labels.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", "cluster", "role"])
        for sid, lab, role in zip(ids, res.labels, res.roles):
            w.writerow([sid, int(lab), role])
    run.record("epsilon.json", "cluster")
    run.record("labels.csv", "cluster")
    if run.cfg.output.plot:
        plot_embeddings(z, res.labels, run.path("embeddings.png"), eps)
        run.record("embeddings.png", "cluster")
    log.info("cluster: eps=%.4g (%s), %d clusters, %d noise", eps, source, res.n_clusters, res.noise.size)


def stage_eval(run: Run) -> dict:
    with run.require("labels.csv").open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    ids = [r["sensor_id"] for r in rows]
    pred = [int(r["cluster"]) for r in rows]
    eps = json.loads(run.require("epsilon.json").read_text())
    extra = {
        "epsilon": eps,
        "n_clusters": len({p for p in pred if p != clustering.NOISE}),
        "noise_sensors": [i for i, p in zip(ids, pred) if p == clustering.NOISE],
        "config_hash": run.cfg.section_hash("eval"),
    }
    truth = _ground_truth(run)
    if truth is None:
        report = {"ari": None, **extra}
    else:
        missing = [i for i in ids if i not in truth]
        if missing:
            raise DataError(f"ground truth lacks sensors {missing[:5]}")
        report = evaluation.build_report(ids, [truth[i] for i in ids], pred, extra)
    evaluation.write_report(report, run.path("report.json"))
    run.record("report.json", "eval")
    if report["ari"] is not None:
        log.info("eval: adjusted Rand index %.4f", report["ari"])
    return report


def plot_embeddings(z: np.ndarray, labels: np.ndarray, path: Path, eps: float) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5), dpi=100)
    cmap = plt.get_cmap("tab10")
    for lab in sorted(set(int(v) for v in labels)):
        sel = labels == lab
        if lab == clustering.NOISE:
            ax.scatter(z[sel, 0], z[sel, 1], c="0.5", marker="x", label="noise")
        else:
            ax.scatter(z[sel, 0], z[sel, 1], color=cmap(lab % 10), s=18, label=f"cluster {lab}")
    ax.set_xlabel("z1")
    ax.set_ylabel("z2")
    ax.set_title(f"sensor embeddings (eps={eps:.3g})")
    ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


STAGE_FUNCS = {
    "simulate": stage_simulate,
    "dtw": stage_dtw,
    "train": stage_train,
    "embed": stage_embed,
    "cluster": stage_cluster,
    "eval": stage_eval,
}


def cmd_stage(stage: str, cfg: PipelineConfig) -> None:
    run = Run(cfg)
    with lockfile(run.out):
        _tagged(stage, STAGE_FUNCS[stage], run)


def cmd_run(cfg: PipelineConfig) -> None:
    run = Run(cfg)
    with lockfile(run.out):
        for stage in STAGES:
            if stage == "simulate" and not cfg.is_simulated:
                continue
            _tagged(stage, STAGE_FUNCS[stage], run)


class StageError(Exception):
    def __init__(self, stage: str, cause: RogueSensorError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def _tagged(stage, fn, run):
    try:
        return fn(run)
    except RogueSensorError as exc:
        raise StageError(stage, exc) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML pipeline configuration")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--out", type=str, help="output directory (overrides config)")
    common.add_argument("--epsilon", type=float, help="fixed DBSCAN radius instead of the knee")
    common.add_argument("--scale", choices=data.SCALE_MODES, help="normalization divisor")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rogue-sensors", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run every stage")
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run only the {stage} stage")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, epsilon=args.epsilon, scale=args.scale)
        if args.command == "run":
            cmd_run(cfg)
        else:
            cmd_stage(args.command, cfg)
    except StageError as exc:
        log.error("%s", exc)
        return exc.cause.exit_code
    except RogueSensorError as exc:
        log.error("%s", exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
