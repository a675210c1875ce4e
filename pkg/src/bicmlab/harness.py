"""Seeded Monte-Carlo BER/FER experiment runner and estimator training.

Reproducibility contract: a (config, master seed) pair fully determines every
count.  Frames are simulated in fixed-size chunks whose RNG streams derive
from (master seed, grid point index, chunk index); chunk results are folded
in chunk order, so the totals are identical for any worker count.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import refdec
from .bicm import (
    FrameBatch,
    bsc_symmetry_ztest,
    draw_interleaver,
    estimate_channel,
    measure_flip_correlation,
    predicted_crossover,
    transmit_batch,
)
from .gf2code import LinearCode, get_code
from .modem import NoiseConfig, build_constellation
from .neural import (
    Adam,
    RnnConfig,
    TransformerConfig,
    build_rnn_estimator,
    build_transformer_estimator,
    load_checkpoint,
    save_checkpoint,
    train_step,
)
from .refdec import ErrorCounter
from .sbnd import make_training_batch, statistic_batch

__all__ = [
    "StopRule",
    "ExperimentConfig",
    "BerRecord",
    "parse_config_text",
    "run_point",
    "run_sweep",
    "write_csv",
    "TrainConfig",
    "TRAIN_PRESETS",
    "train_estimator",
    "NeuralEstimator",
    "make_decoder",
    "verify_channel",
    "CHUNK_FRAMES",
]

CHUNK_FRAMES = 2048


@dataclass(frozen=True)
class StopRule:
    """Stop a grid point after enough errors, or at the frame cap."""

    min_frame_errors: int = 100
    min_bit_errors: int = 0
    max_frames: int = 10_000_000

    def __post_init__(self):
        if self.max_frames < 1:
            raise ValueError("max_frames must be positive")
        if self.min_frame_errors < 0 or self.min_bit_errors < 0:
            raise ValueError("error targets must be non-negative")

    def satisfied(self, frames: int, bit_errors: int, frame_errors: int) -> bool:
        if frames >= self.max_frames:
            return True
        if self.min_frame_errors and frame_errors >= self.min_frame_errors:
            return True
        if self.min_bit_errors and bit_errors >= self.min_bit_errors:
            return True
        return False


@dataclass(frozen=True)
class ExperimentConfig:
    code: str = "hamming_7_4"
    constellation: str = "bpsk"
    decoder: str = "hard-pinv"          # hard-pinv | map | osd | sbnd
    osd_order: int = 2
    checkpoint: str = ""                 # for the sbnd decoder
    ebn0_db: tuple[float, ...] = (2.0, 4.0, 6.0)
    demap: str = "exact"                 # exact | maxlog
    interleaver: str = "fresh"           # fresh | pinned
    interleaver_seed: int = 0
    pad: bool = False
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    workers: int = 1
    out: str = ""

    def __post_init__(self):
        if not self.ebn0_db:
            raise ValueError("Eb/N0 grid is empty")
        if self.decoder not in ("hard-pinv", "map", "osd", "sbnd"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        if self.decoder == "sbnd" and not self.checkpoint:
            raise ValueError("sbnd decoder needs a checkpoint path")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def decoder_id(self) -> str:
        if self.decoder == "osd":
            return f"osd(order={self.osd_order})"
        if self.decoder == "sbnd":
            return f"sbnd({os.path.basename(self.checkpoint)})"
        return self.decoder


def parse_config_text(text: str) -> dict:
    """Flat 'key = value' lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def config_from_mapping(kv: dict) -> ExperimentConfig:
    base = ExperimentConfig()
    stop = StopRule(
        min_frame_errors=int(kv.get("min_frame_errors", 100)),
        min_bit_errors=int(kv.get("min_bit_errors", 0)),
        max_frames=int(kv.get("max_frames", 10_000_000)),
    )
    grid = tuple(
        float(t) for t in kv.get("ebn0_db", "2,4,6").replace(",", " ").split()
    )
    return replace(
        base,
        code=kv.get("code", base.code),
        constellation=kv.get("constellation", base.constellation),
        decoder=kv.get("decoder", base.decoder),
        osd_order=int(kv.get("osd_order", base.osd_order)),
        checkpoint=kv.get("checkpoint", ""),
        ebn0_db=grid,
        demap=kv.get("demap", base.demap),
        interleaver=kv.get("interleaver", base.interleaver),
        interleaver_seed=int(kv.get("interleaver_seed", 0)),
        pad=kv.get("pad", "false").lower() in ("1", "true", "yes"),
        stop=stop,
        seed=int(kv.get("seed", 0)),
        workers=int(kv.get("workers", 1)),
        out=kv.get("out", ""),
    )


@dataclass(frozen=True)
class BerRecord:
    ebn0_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    ml_bound_ber: float | None
    seconds: float
    seed: int
    decoder_id: str


# ---------------------------------------------------------------------------
# decoders operating on simulated chunks
# ---------------------------------------------------------------------------

@dataclass
class ChunkStats:
    frames: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    ml_bit_errors: int | None = None
    ml_frame_errors: int | None = None


class HardPinvDecoder:
    def __init__(self, code: LinearCode):
        self.code = code

    def decode_chunk(self, fb: FrameBatch) -> ChunkStats:
        u_hat = self.code.p_inv_apply(fb.hard)
        return _count(u_hat, fb.u)


class MapDecoder:
    def __init__(self, code: LinearCode):
        self.code = code
        code.codebook()  # prime the cache before workers share it

    def decode_chunk(self, fb: FrameBatch) -> ChunkStats:
        cws = self.code.codebook().astype(np.float64)
        metrics = fb.llr @ (1.0 - 2.0 * cws).T  # (B, 2^k)
        pick = np.argmax(metrics, axis=1)
        best = metrics[np.arange(len(fb)), pick]
        # exact ties (possible only for degenerate LLRs) resolve to the
        # lexicographically smallest codeword, as in refdec
        for i in np.nonzero(np.sum(metrics == best[:, None], axis=1) > 1)[0]:
            pick[i] = _lex_smallest(self.code.codebook(), metrics[i])
        u_hat = self.code.messages()[pick]
        return _count(u_hat, fb.u)


def _lex_smallest(cws: np.ndarray, metric_row: np.ndarray) -> int:
    idx = np.nonzero(metric_row == metric_row.max())[0]
    rows = cws[idx]
    return int(idx[np.lexsort(rows.T[::-1])[0]])


class OsdDecoder:
    # per-frame python decoding is GIL-bound: threads only thrash it
    parallel = False

    def __init__(self, code: LinearCode, order: int):
        self.code = code
        self.order = order

    def decode_chunk(self, fb: FrameBatch,
                     cancel: threading.Event | None = None) -> ChunkStats | None:
        ctr = ErrorCounter()
        for i in range(len(fb)):
            if cancel is not None and (i & 63) == 0 and cancel.is_set():
                return None  # chunk is past the stop point, result unused
            out = refdec.osd_decode(self.code, fb.llr[i], self.order)
            refdec.ml_bound_update(ctr, self.code, fb.c[i], out, fb.llr[i])
        return ChunkStats(
            frames=ctr.frames,
            bit_errors=ctr.bit_errors,
            frame_errors=ctr.frame_errors,
            ml_bit_errors=ctr.ml_bit_errors,
            ml_frame_errors=ctr.ml_frame_errors,
        )


class NeuralEstimator:
    """Checkpointed network behind the estimator interface.

    Applies the fixed reliability scale recorded at training time; a lock
    serializes forward passes because layer caches are per-instance state.
    """

    def __init__(self, net, n: int, input_scale: float = 1.0):
        self.net = net
        self.n = n
        self.input_scale = input_scale
        self._lock = threading.Lock()

    @classmethod
    def from_checkpoint(cls, path) -> "NeuralEstimator":
        net, header = load_checkpoint(path)
        cfg = net.cfg
        n = (cfg.r + cfg.k) // 2
        return cls(net, n=n, input_scale=header.get("input_scale", 1.0))

    def predict(self, stats: np.ndarray) -> np.ndarray:
        x = np.array(stats, dtype=np.float64)
        x[:, :self.n] *= self.input_scale
        with self._lock:
            return np.asarray(self.net.predict(x), dtype=np.float64)


class SbndDecoder:
    def __init__(self, code: LinearCode, estimator: NeuralEstimator):
        self.code = code
        self.est = estimator

    def decode_chunk(self, fb: FrameBatch) -> ChunkStats:
        stats = statistic_batch(self.code, fb.llr)
        scores = self.est.predict(stats)
        flips = (scores > 0).astype(np.uint8)
        u_hat = self.code.p_inv_apply(fb.hard) ^ flips
        return _count(u_hat, fb.u)


def _count(u_hat: np.ndarray, u: np.ndarray) -> ChunkStats:
    wrong = u_hat != u
    return ChunkStats(
        frames=u.shape[0],
        bit_errors=int(np.count_nonzero(wrong)),
        frame_errors=int(np.count_nonzero(wrong.any(axis=1))),
    )


def make_decoder(cfg: ExperimentConfig, code: LinearCode):
    if cfg.decoder == "hard-pinv":
        return HardPinvDecoder(code)
    if cfg.decoder == "map":
        return MapDecoder(code)
    if cfg.decoder == "osd":
        return OsdDecoder(code, cfg.osd_order)
    return SbndDecoder(code, NeuralEstimator.from_checkpoint(cfg.checkpoint))


# ---------------------------------------------------------------------------
# Monte-Carlo driver
# ---------------------------------------------------------------------------

def _chunk_rng(seed: int, point_index: int, chunk_index: int
               ) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(point_index, chunk_index))
    )


def run_point(cfg: ExperimentConfig, ebn0_db: float,
              point_index: int | None = None) -> BerRecord:
    """Simulate one grid point until the stop rule fires."""
    if point_index is None:
        point_index = cfg.ebn0_db.index(ebn0_db) if ebn0_db in cfg.ebn0_db else 0
    code = get_code(cfg.code)
    const = build_constellation(cfg.constellation)
    noise = NoiseConfig.from_ebn0_db(ebn0_db, code.rate, const.m)
    decoder = make_decoder(cfg, code)
    pinned = (
        draw_interleaver(code.n, np.random.default_rng(cfg.interleaver_seed))
        if cfg.interleaver == "pinned" else None
    )

    cancel = threading.Event()
    osd_like = cfg.decoder == "osd"

    def work(chunk_index: int) -> ChunkStats | None:
        if cancel.is_set():
            return None
        rng = _chunk_rng(cfg.seed, point_index, chunk_index)
        fb = transmit_batch(
            code, const, noise, rng, CHUNK_FRAMES,
            demap_kind=cfg.demap, interleaver=pinned, pad=cfg.pad,
        )
        if osd_like:
            return decoder.decode_chunk(fb, cancel=cancel)
        return decoder.decode_chunk(fb)

    t0 = time.perf_counter()
    frames = bits = fes = 0
    ml_bits = ml_fes = None
    if osd_like:
        ml_bits = ml_fes = 0

    # chunk partitioning is fixed, so totals never depend on the pool size
    pool = cfg.workers if getattr(decoder, "parallel", True) else 1
    window = max(2 * pool, 2)
    pending: dict[int, object] = {}
    next_submit = 0
    next_collect = 0
    with ThreadPoolExecutor(max_workers=pool) as ex:
        stop = False
        while not stop:
            while len(pending) < window:
                pending[next_submit] = ex.submit(work, next_submit)
                next_submit += 1
            res = pending.pop(next_collect).result()
            next_collect += 1
            frames += res.frames
            bits += res.bit_errors
            fes += res.frame_errors
            if ml_bits is not None:
                ml_bits += res.ml_bit_errors
                ml_fes += res.ml_frame_errors
            stop = cfg.stop.satisfied(frames, bits, fes)
        # chunks beyond the stop prefix never enter the totals, so they can
        # abort mid-flight; totals stay identical for any worker count
        cancel.set()
        for fut in pending.values():
            fut.cancel()

    k = code.k
    return BerRecord(
        ebn0_db=ebn0_db,
        frames=frames,
        bit_errors=bits,
        frame_errors=fes,
        ber=bits / (frames * k),
        fer=fes / frames,
        ml_bound_ber=None if ml_bits is None else ml_bits / (frames * k),
        seconds=time.perf_counter() - t0,
        seed=cfg.seed,
        decoder_id=cfg.decoder_id(),
    )


def run_sweep(cfg: ExperimentConfig) -> list[BerRecord]:
    records = [
        run_point(cfg, e, point_index=i) for i, e in enumerate(cfg.ebn0_db)
    ]
    if cfg.out:
        write_csv(cfg.out, cfg, records)
    return records


CSV_HEADER = "ebn0_db,frames,bit_errors,frame_errors,ber,fer,ml_bound_ber,seconds"


def write_csv(path, cfg: ExperimentConfig, records: list[BerRecord]) -> None:
    lines = [
        f"# code={cfg.code}",
        f"# constellation={cfg.constellation}",
        f"# decoder={cfg.decoder_id()}",
        f"# demap={cfg.demap}",
        f"# interleaver={cfg.interleaver}",
        f"# seed={cfg.seed}",
        f"# stop=min_fe:{cfg.stop.min_frame_errors},min_be:{cfg.stop.min_bit_errors},max_frames:{cfg.stop.max_frames}",
        CSV_HEADER,
    ]
    for r in records:
        ml = "" if r.ml_bound_ber is None else f"{r.ml_bound_ber:.8g}"
        lines.append(
            f"{r.ebn0_db:g},{r.frames},{r.bit_errors},{r.frame_errors},"
            f"{r.ber:.8g},{r.fer:.8g},{ml},{r.seconds:.3f}"
        )
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# estimator training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    code: str = "polar_16_8"
    constellation: str = "qam16"
    arch: str = "rnn"
    alpha: int = 2
    time_steps: int = 3
    depth: int = 2
    embed_dim: int = 32
    heads: int = 4
    encoders: int = 2
    batch_size: int = 512
    steps: int = 3000
    lr: float = 1e-3
    train_ebn0_db: float = 5.0
    demap: str = "exact"
    pad: bool = False
    seed: int = 0
    out: str = "estimator.ckpt"
    curve: str = ""
    log_every: int = 100
    resume: str = ""

    def model_config(self, code: LinearCode):
        if self.arch == "rnn":
            return RnnConfig.for_code(code.n, code.k, alpha=self.alpha,
                                      time_steps=self.time_steps,
                                      depth=self.depth)
        if self.arch == "transformer":
            return TransformerConfig.for_code(code.n, code.k,
                                              embed_dim=self.embed_dim,
                                              heads=self.heads,
                                              encoders=self.encoders)
        raise ValueError(f"unknown architecture {self.arch!r}")


TRAIN_PRESETS: dict[str, dict] = {
    # full-scale reference models; constructing them is cheap, training
    # them is not a desk-scale activity
    "table1-rnn": dict(arch="rnn", alpha=5, time_steps=5, depth=5,
                       batch_size=4096),
    "table1-transformer": dict(arch="transformer", embed_dim=128, heads=8,
                               encoders=10, batch_size=256),
    # defaults sized for minutes of CPU training
    "desk-rnn": dict(arch="rnn", alpha=2, time_steps=3, depth=2,
                     batch_size=512),
    "desk-transformer": dict(arch="transformer", embed_dim=32, heads=4,
                             encoders=2, batch_size=256),
}


def train_config_from_preset(preset: str, **overrides) -> TrainConfig:
    if preset not in TRAIN_PRESETS:
        raise ValueError(
            f"unknown preset {preset!r}; choose from {', '.join(TRAIN_PRESETS)}"
        )
    kw = dict(TRAIN_PRESETS[preset])
    kw.update(overrides)
    return TrainConfig(**kw)


def train_estimator(cfg: TrainConfig, verbose: bool = False) -> str:
    """Train a bit-flip estimator on streamed random-codeword BICM frames.

    Returns the checkpoint path.  The reliability normalization constant is
    measured once on a calibration draw at the training SNR and frozen into
    the checkpoint; inference applies the same constant.
    """
    code = get_code(cfg.code)
    const = build_constellation(cfg.constellation)
    noise = NoiseConfig.from_ebn0_db(cfg.train_ebn0_db, code.rate, const.m)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    start_step = 0
    if cfg.resume:
        net, header = load_checkpoint(cfg.resume)
        input_scale = header["input_scale"]
        start_step = header["step"]
    else:
        model_cfg = cfg.model_config(code)
        if cfg.arch == "rnn":
            net = build_rnn_estimator(model_cfg, rng)
        else:
            net = build_transformer_estimator(model_cfg, rng)
        calib = transmit_batch(code, const, noise, rng, 4096,
                               demap_kind=cfg.demap, pad=cfg.pad)
        input_scale = 1.0 / float(np.mean(calib.reliab))
    if verbose:
        print(f"model: {cfg.arch} with {net.num_params()} parameters")

    opt = Adam(net.params(), lr=cfg.lr)
    curve: list[tuple[int, float]] = []
    t0 = time.perf_counter()
    try:
        for step in range(start_step, start_step + cfg.steps):
            batch_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, step))
            )
            fb = transmit_batch(code, const, noise, batch_rng, cfg.batch_size,
                                demap_kind=cfg.demap, pad=cfg.pad)
            x, t = make_training_batch(fb, code)
            x[:, :code.n] *= input_scale
            loss = train_step(net, x.astype(np.float32),
                              t.astype(np.float32), opt)
            if (step + 1) % cfg.log_every == 0 or step == start_step:
                curve.append((step + 1, loss))
                if verbose:
                    print(f"step {step + 1:6d}  loss {loss:.5f}  "
                          f"({time.perf_counter() - t0:.0f}s)")
    except Exception:
        save_checkpoint(str(cfg.out) + ".diverged", net,
                        input_scale=input_scale, step=start_step,
                        seed=cfg.seed)
        raise

    save_checkpoint(cfg.out, net, input_scale=input_scale,
                    step=start_step + cfg.steps, seed=cfg.seed)
    if cfg.curve:
        tmp = str(cfg.curve) + ".tmp"
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write("step,loss\n")
            for s, l in curve:
                fh.write(f"{s},{l:.6f}\n")
        os.replace(tmp, cfg.curve)
    return cfg.out


# ---------------------------------------------------------------------------
# channel-model verification battery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    bound: str
    passed: bool


def verify_channel(seed: int = 0, code_name: str = "polar_64_32",
                   symmetry_bits: int = 1_000_000,
                   corr_frames: int = 150_000) -> list[CheckRow]:
    """Run the binary-channel-model test battery and return one row per check.

    Covers: crossover symmetry z-tests and flip-correlation bounds for Gray
    8-PSK (Es/N0 3 and 6 dB) and Gray 16-QAM (0 and 6 dB), the quadrature
    crossover oracle for 8-PSK, and the closed-form BPSK crossover at 0 dB.
    Hard decisions come from the max-log demapper, whose decision regions are
    the ones the binary channel model is built on.
    """
    rows: list[CheckRow] = []
    code = get_code(code_name)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(99,)))
    frames_sym = -(-symmetry_bits // code.n)

    bpsk = build_constellation("bpsk")
    n0 = NoiseConfig.from_esn0_db(0.0)
    est = estimate_channel(code, bpsk, n0, frames_sym, rng)
    q_hat, se = est.pooled_q(), est.pooled_q_stderr()
    _, q_ref = predicted_crossover(bpsk, n0)
    rows.append(CheckRow("bpsk@0dB crossover vs closed form (|dev|/sigma)",
                         abs(q_hat - q_ref) / se, "<= 3", abs(q_hat - q_ref) <= 3 * se))

    for kind, esn0_list in (("psk8", (3.0, 6.0)), ("qam16", (0.0, 6.0))):
        const = build_constellation(kind)
        pad = code.n % const.m != 0
        for esn0 in esn0_list:
            noise = NoiseConfig.from_esn0_db(esn0)
            tag = f"{kind}@{esn0:g}dB"
            est = estimate_channel(code, const, noise, frames_sym, rng, pad=pad)
            z = bsc_symmetry_ztest(est)
            rows.append(CheckRow(f"{tag} symmetry max |z|", z.max_abs_z(),
                                 "<= 4", z.max_abs_z() <= 4.0))
            if kind == "psk8":
                per, q_ref = predicted_crossover(const, noise)
                q_hat, se = est.pooled_q(), est.pooled_q_stderr()
                rows.append(CheckRow(
                    f"{tag} crossover vs quadrature (|dev|/sigma)",
                    abs(q_hat - q_ref) / se, "<= 3",
                    abs(q_hat - q_ref) <= 3 * se))
            corr = measure_flip_correlation(code, const, noise, corr_frames,
                                            rng, pad=pad)
            rows.append(CheckRow(f"{tag} flip correlation max |corr|",
                                 corr.max_abs_corr, "<= 0.02",
                                 corr.max_abs_corr <= 0.02))
    return rows
