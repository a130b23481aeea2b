"""Command-line workbench: ``crossmpt <subcommand> [flags]``.

Exit status is 0 on success, 1 for user errors (bad flags, missing or
malformed files, checkpoint/code mismatch) and 2 for internal errors.
Every file the CLI writes goes through a temp file and a rename.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

import numpy as np

from .channel import modulate_bpsk, receive
from .codes import AlistError, RankError, bundled_codes, load_code
from .evaluation import (BPDecoder, HardDecoder, MLDecoder, NNDecoder, estimate_ber,
                         flops_for_code)
from .masks import build_crossmpt_masks, build_ecct_mask, ecct_block_counts, mask_density
from .model import (CheckpointError, ModelConfig, atomic_write_text, attention_scores,
                    build_masks, init_params, load_checkpoint, save_checkpoint)
from .train import TrainConfig, run_training

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _code(args):
    return load_code(args.pcm, k=getattr(args, "k", None))


def _add_pcm(p, multiple=False):
    help_ = ("PCM file (alist or plain 0/1 rows) or bundled code name; bare names are also "
             "looked up in $CROSSMPT_PCM_DIR. Bundled: " + ", ".join(bundled_codes()))
    if multiple:
        p.add_argument("--pcm", action="append", required=True, help=help_ + " (repeatable)")
    else:
        p.add_argument("--pcm", required=True, help=help_)
    p.add_argument("--k", type=int, default=None, help="declared code dimension (checked against the rank)")


def _add_model(p):
    p.add_argument("--arch", choices=("crossmpt", "ecct"), default="crossmpt", help="decoder architecture")
    p.add_argument("--layers", type=int, default=6, help="number of decoder layers N")
    p.add_argument("--dim", type=int, default=128, help="embedding dimension d")
    p.add_argument("--heads", type=int, default=8, help="attention heads")
    p.add_argument("--ffnn-multiplier", type=int, default=4, help="FFN hidden width as a multiple of d")
    p.add_argument("--syndrome-embedding", choices=("pm1", "binary"), default="pm1",
                   help="syndrome bit mapping: pm1 (0->+1, 1->-1) or binary (0/1)")


def _model_config(args, code) -> ModelConfig:
    return ModelConfig.for_code(code, num_layers=args.layers, embed_dim=args.dim, heads=args.heads,
                                ffnn_multiplier=args.ffnn_multiplier, arch=args.arch,
                                syndrome_embedding=args.syndrome_embedding)


def _load_matching(path, code):
    cfg, params, _, _ = load_checkpoint(path)
    if (cfg.n, cfg.n_checks) != (code.n, code.n_checks):
        raise CheckpointError(f"checkpoint {path} was built for n={cfg.n}, m={cfg.n_checks}; "
                              f"code {code.name} has n={code.n}, m={code.n_checks}")
    return cfg, params


# ---------------------------------------------------------------------------
# subcommands

def cmd_code_info(args):
    code = _code(args)
    H = code.H
    col = H.sum(axis=0)
    row = H.sum(axis=1)

    def profile(deg):
        vals, counts = np.unique(deg, return_counts=True)
        return " ".join(f"{v}:{c}" for v, c in zip(vals, counts))

    buf = io.StringIO()
    buf.write("name,n,k,rows,rank,rate,ones,bit_degrees,check_degrees\n")
    buf.write(f"{code.name},{code.n},{code.k},{code.n_checks},{code.rank},{code.rate:.6f},"
              f"{int(H.sum())},{profile(col)},{profile(row)}\n")
    _emit(buf.getvalue(), args.out)


def cmd_mask_stats(args):
    buf = io.StringIO()
    buf.write("name,n,k,rho1,rho2,mm_unmasked,ms_unmasked,ss_unmasked\n")
    for source in args.pcm:
        code = load_code(source, k=args.k)
        ecct = build_ecct_mask(code.H)
        blocks = ecct_block_counts(ecct, code.n)
        rho1 = 100 * mask_density(ecct)
        rho2 = 100 * mask_density(build_crossmpt_masks(code.H))
        buf.write(f"{code.name},{code.n},{code.k},{rho1:.2f},{rho2:.2f},"
                  f"{blocks.mm},{blocks.ms},{blocks.ss}\n")
    _emit(buf.getvalue(), args.out)


def cmd_init(args):
    code = _code(args)
    cfg = _model_config(args, code)
    params = init_params(cfg, np.random.default_rng(args.seed))
    save_checkpoint(args.out, params, cfg)


def cmd_train(args):
    code = _code(args)
    out = Path(args.out_dir)
    tcfg = TrainConfig(epochs=args.epochs, batches_per_epoch=args.batches, batch_size=args.batch_size,
                       lr_start=args.lr_start, lr_end=args.lr_end,
                       ebno_range_db=(args.snr_low, args.snr_high), snr_sampling=args.snr_sampling,
                       seed=args.seed)
    if args.resume:
        cfg, _ = _load_matching(args.resume, code)
    else:
        cfg = _model_config(args, code)

    def progress(epoch, loss, lr):
        if not args.quiet:
            print(f"epoch {epoch + 1}/{tcfg.epochs} loss {loss:.6f} lr {lr:.3e}", file=sys.stderr)

    rec = run_training(tcfg, code, cfg, resume_from=args.resume,
                       checkpoint_dir=out / "checkpoints" if args.checkpoint_every else None,
                       checkpoint_every=args.checkpoint_every, loss_csv=out / "loss.csv",
                       progress=progress)
    save_checkpoint(out / "model.ckpt", rec.params, cfg, step=tcfg.total_steps)


def _decoder(args, code):
    kind = args.decoder
    if kind == "hard":
        return HardDecoder()
    if kind in ("bp", "ms"):
        return BPDecoder(code, max_iter=args.bp_iters, variant="sum_product" if kind == "bp" else "min_sum")
    if kind == "ml":
        return MLDecoder(code)
    if args.checkpoint is None:
        raise UsageError("eval: --decoder nn needs --checkpoint")
    cfg, params = _load_matching(args.checkpoint, code)
    return NNDecoder(params, cfg, code)


def cmd_eval(args):
    code = _code(args)
    decoder = _decoder(args, code)
    report = estimate_ber(decoder, code, args.snr, min_frame_errors=args.min_frame_errors,
                          max_frames=args.max_frames, seed=args.seed, chunk_size=args.chunk,
                          workers=args.workers, channel=args.channel)
    _emit(report.to_csv(), args.out)
    if args.plot_out:
        report.write_plot_data(args.plot_out)


def cmd_attn_dump(args):
    code = _code(args)
    cfg, params = _load_matching(args.checkpoint, code)
    if args.probe is not None:
        y = np.array(args.probe, dtype=np.float64)
        if y.shape != (code.n,):
            raise UsageError(f"attn-dump: probe has {y.size} values, code has n={code.n}")
    else:
        x = np.zeros(code.n, dtype=np.uint8)
        y = modulate_bpsk(x) * args.amplitude
        for i in args.flip:
            if not 0 <= i < code.n:
                raise UsageError(f"attn-dump: bit index {i} out of range for n={code.n}")
            y[i] = -y[i]
    rx = receive(y[None], code.H)
    masks = build_masks(cfg, code.H)
    res = attention_scores(params, cfg, rx, masks, aggregate=args.aggregate, reduce=args.reduce)
    layers = [res] if args.aggregate == "mean_over_layers" else res
    buf = io.StringIO()
    buf.write("layer,map,row,col,score\n")
    for li, entry in enumerate(layers):
        tag = "mean" if args.aggregate == "mean_over_layers" else str(li)
        for name in sorted(entry):
            a = entry[name][0]
            if a.ndim == 1:
                for c, v in enumerate(a):
                    buf.write(f"{tag},{name},,{c},{float(v)!r}\n")
            else:
                for r, c in np.ndindex(a.shape):
                    buf.write(f"{tag},{name},{r},{c},{float(a[r, c])!r}\n")
    _emit(buf.getvalue(), args.out)


def cmd_flops(args):
    header = None
    buf = io.StringIO()
    for source in args.pcm:
        code = load_code(source)
        rep = flops_for_code(code, num_layers=args.layers, embed_dim=args.dim, heads=args.heads,
                             ffnn_multiplier=args.ffnn_multiplier, k=args.k)
        lines = rep.to_csv().splitlines()
        if header is None:
            header = "code," + lines[0]
            buf.write(header + "\n")
        for line in lines[1:]:
            buf.write(f"{code.name},{line}\n")
    _emit(buf.getvalue(), args.out)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crossmpt", description="Transformer and classical decoders for linear block codes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("code-info", help="n, k, rank and degree profiles of a PCM")
    _add_pcm(p)
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_code_info)

    p = sub.add_parser("mask-stats", help="ECCT (rho1) and CrossMPT (rho2) mask densities, percent")
    _add_pcm(p, multiple=True)
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_mask_stats)

    p = sub.add_parser("init", help="write a freshly initialised checkpoint")
    _add_pcm(p)
    _add_model(p)
    p.add_argument("--seed", type=int, default=0, help="initialisation seed")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("train", help="train a decoder; writes model.ckpt and loss.csv into --out-dir")
    _add_pcm(p)
    _add_model(p)
    p.add_argument("--epochs", type=int, default=1000, help="number of epochs")
    p.add_argument("--batches", type=int, default=1000, help="minibatches per epoch")
    p.add_argument("--batch-size", type=int, default=128, help="frames per minibatch")
    p.add_argument("--lr-start", type=float, default=1e-4, help="initial learning rate")
    p.add_argument("--lr-end", type=float, default=5e-7, help="final learning rate (cosine decay)")
    p.add_argument("--snr-low", type=float, default=3.0, help="lowest training Eb/N0 in dB")
    p.add_argument("--snr-high", type=float, default=7.0, help="highest training Eb/N0 in dB")
    p.add_argument("--snr-sampling", choices=("integer", "uniform"), default="integer",
                   help="per-frame Eb/N0 from the integer dB grid or continuous uniform")
    p.add_argument("--seed", type=int, default=0, help="seed for initialisation and batches")
    p.add_argument("--checkpoint-every", type=int, default=0,
                   help="also write checkpoints/epoch_XXXX.ckpt every this many epochs (0: never)")
    p.add_argument("--resume", default=None, help="continue from a checkpoint written with --checkpoint-every")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true", help="no per-epoch progress on stderr")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Monte-Carlo BER/FER over random codewords")
    _add_pcm(p)
    p.add_argument("--decoder", choices=("nn", "bp", "ms", "ml", "hard"), required=True,
                   help="nn (needs --checkpoint), bp (sum-product), ms (min-sum), ml, hard")
    p.add_argument("--checkpoint", default=None, help="model checkpoint for --decoder nn")
    p.add_argument("--snr", type=_floats, required=True, help="comma-separated Eb/N0 values in dB")
    p.add_argument("--min-frame-errors", type=int, default=500, help="stop a point after this many frame errors")
    p.add_argument("--max-frames", type=int, default=10 ** 7, help="frame cap per point")
    p.add_argument("--chunk", type=int, default=1000, help="frames per simulation chunk")
    p.add_argument("--bp-iters", type=int, default=50, help="BP iteration cap")
    p.add_argument("--channel", choices=("awgn", "rayleigh"), default="awgn", help="channel model")
    p.add_argument("--seed", type=int, default=0, help="simulation seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.add_argument("--plot-out", default=None, help="also write an ebno_db,ber series here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attn-dump", help="head-averaged attention scores for a probe word")
    _add_pcm(p)
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--flip", type=_ints, default=[0],
                   help="bits of the all-zero codeword to corrupt (default: 0)")
    p.add_argument("--amplitude", type=float, default=1.0, help="probe magnitude per bit")
    p.add_argument("--probe", type=_floats, default=None, help="explicit received word, overrides --flip")
    p.add_argument("--aggregate", choices=("per_layer", "mean_over_layers"), default="per_layer",
                   help="keep layers apart or average them")
    p.add_argument("--reduce", choices=("none", "column_sum"), default="none",
                   help="dump full maps or per-column sums")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_attn_dump)

    p = sub.add_parser("flops", help="FLOPs of CrossMPT and ECCT for a code")
    _add_pcm(p, multiple=True)
    p.add_argument("--layers", type=int, default=6, help="number of decoder layers N")
    p.add_argument("--dim", type=int, default=128, help="embedding dimension d")
    p.add_argument("--heads", type=int, default=8, help="attention heads")
    p.add_argument("--ffnn-multiplier", type=int, default=4, help="FFN hidden width as a multiple of d")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_flops)
    return parser


_USER_ERRORS = (UsageError, FileNotFoundError, IsADirectoryError, AlistError, RankError,
                CheckpointError, ValueError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
