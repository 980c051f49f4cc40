"""BER records, CSV round-trip, gnuplot script emission and error-bar comparisons."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

CSV_HEADER = ("snr_db", "detector", "fusion", "csi", "ap_mode", "bit_errors", "bits", "ber", "trials")


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    fusion: str
    csi: str
    ap_mode: str
    bit_errors: float  # fractional for standard fusion (average over serving APs)
    bits: int
    ber: float
    trials: int

    @property
    def std_error(self) -> float:
        """Binomial standard error of the BER estimate."""
        return math.sqrt(self.ber * (1.0 - self.ber) / self.bits)

    @property
    def label(self) -> str:
        return f"{self.detector} {self.fusion} {self.csi} {self.ap_mode}"


def make_record(snr_db, detector, fusion, csi, ap_mode, bit_errors, bits, trials) -> BerRecord:
    if bits <= 0:
        raise ValueError("a BER record needs a positive bit count")
    return BerRecord(float(snr_db), detector, fusion, csi, ap_mode, float(bit_errors), int(bits),
                     float(bit_errors) / int(bits), int(trials))


def records_from_tally(tally, iteration: int = -1) -> list:
    out = []
    for s, snr_db in enumerate(tally.config.snr_grid):
        for j, scheme in enumerate(tally.schemes):
            out.append(make_record(snr_db, scheme.detector_id, scheme.fusion, scheme.csi, scheme.ap_mode,
                                   tally.errors[s, j, iteration], tally.bits[s], tally.trials[s]))
    return out


def emit_results(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            row = astuple(rec)
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def load_results(path) -> list:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        types = {f.name: f.type for f in fields(BerRecord)}
        cast = {"float": float, "int": int, "str": str}
        return [BerRecord(**{k: cast[types[k]](v) for k, v in row.items()}) for row in reader]


def write_gnuplot(records, csv_path, script_path, output="ber.png") -> Path:
    """Write a gnuplot script plotting BER against SNR, one curve per scheme."""
    labels = sorted({(r.detector, r.fusion, r.csi, r.ap_mode) for r in records})
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'SNR (dB)'",
        "set ylabel 'BER'",
        "set grid",
        "set key bottom left",
        "set terminal pngcairo size 900,600",
        f"set output '{output}'",
    ]
    plots = []
    for det, fus, csi, ap in labels:
        cond = (f'(strcol(2) eq "{det}" && strcol(3) eq "{fus}" && strcol(4) eq "{csi}" '
                f'&& strcol(5) eq "{ap}" && $8 > 0) ? $8 : 1/0')
        plots.append(f"'{csv_path}' using 1:({cond}) skip 1 with linespoints title '{det} {fus} {csi} {ap}'")
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no records")
    path = Path(script_path)
    path.write_text("\n".join(lines) + "\n")
    return path


def gap_sigma(better_ber: float, worse_ber: float, bits_better: int, bits_worse: int) -> float:
    """Gap ``worse - better`` in units of the combined binomial standard error."""
    var = better_ber * (1 - better_ber) / bits_better + worse_ber * (1 - worse_ber) / bits_worse
    if var == 0:
        return math.inf if worse_ber > better_ber else 0.0
    return (worse_ber - better_ber) / math.sqrt(var)


def resolved_below(better: BerRecord, worse: BerRecord, factor: float = 2.0) -> bool:
    """``better`` has lower BER than ``worse`` by more than ``factor`` combined error bars."""
    return gap_sigma(better.ber, worse.ber, better.bits, worse.bits) > factor
