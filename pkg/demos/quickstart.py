"""
Quickstart: adapt a prompt over a synthetic feature stream
==========================================================

Generates the default synthetic bundle in memory, runs the full
anchor-guided pipeline next to its baselines, and prints one summary
table. No files are touched unless you pass --out.
"""

import argparse
import time

from anchorsel import AdaptationConfig, SyntheticSpec, generate_bundle, run_stream
from anchorsel.runio import format_summary_table

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--samples", type=int, default=500)
parser.add_argument("--out", default=None, help="directory for run artifacts")
args = parser.parse_args()

# The bundle is the only thing the engine sees: per-class description
# embeddings, base class embeddings for the surrogate encoder, and a
# stream of per-sample view batches. Here a synthetic generator plays
# the role of the vision/text encoders.
bundle = generate_bundle(SyntheticSpec(num_samples=args.samples))
print(f"bundle: {bundle.manifest.num_classes} classes, "
      f"{len(bundle.samples)} samples, "
      f"{bundle.samples[0].views.shape[0]} views each")

# The operating point below sharpens the softmax less aggressively than
# the library default (tau 25 vs 100) and takes two optimizer steps —
# on this geometry the top-logit gaps are ~10x wider than with real
# encoders, so tau scales down to match.
base = dict(tau=25.0, steps=2, lr=0.05, seed=42)

# Methods, weakest first. "zero-shot" never adapts; "tpt-entropy" keeps
# the most-confident views; "cosine-sel" keeps views that agree with
# the original crop; the rest select with the two-stage anchor filter
# and differ only in the loss and in how the ensemble is weighted.
methods = ["zero-shot", "tpt-entropy", "cosine-sel",
           "em-simple", "em-conf", "kld-simple", "ours"]

summaries = []
for method in methods:
    t0 = time.perf_counter()
    summary, results, bank = run_stream(AdaptationConfig(method=method, **base), bundle)
    summaries.append(summary)
    print(f"  {method:<12s} done in {time.perf_counter() - t0:.2f}s")

print()
print(format_summary_table(summaries))

# What to look for: entropy selection *hurts* here (the generator
# plants confident-but-wrong background views, and entropy walks
# straight into them — selection precision 0), while the anchor filter
# keeps mostly informative views and turns the same optimizer into a
# large accuracy gain over zero-shot.

if args.out:
    from anchorsel.runio import write_result_log, write_summary

    cfg = AdaptationConfig(method="ours", **base)
    summary, results, bank = run_stream(cfg, bundle)
    write_result_log(args.out, results)
    write_summary(args.out, summary)
    bank.save(args.out)
    print(f"\nartifacts for 'ours' written to {args.out}")
