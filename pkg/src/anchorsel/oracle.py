"""Brute-force reference for the full selection pipeline.

Everything here is deliberately written with plain Python lists, loops,
and the math module — no numpy, no imports from the production modules —
so it can certify their outputs on small instances. Slow by design;
keep instances tiny (B <= 16, C <= 8).
"""

from __future__ import annotations

import math


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _norm(a):
    return math.sqrt(_dot(a, a))


def _normalize(a):
    n = _norm(a)
    return [x / n for x in a]


def _cos(a, b):
    v = _dot(a, b) / (_norm(a) * _norm(b))
    return max(-1.0, min(1.0, v))


def _softmax(z, temp=1.0):
    scaled = [temp * x for x in z]
    m = max(scaled)
    exps = [math.exp(x - m) for x in scaled]
    s = sum(exps)
    return [e / s for e in exps]


def _entropy_norm(p):
    h = -sum(x * math.log(x) for x in p if x > 0.0)
    return min(1.0, max(0.0, h / math.log(len(p))))


def _count(n, fraction):
    return min(n, max(1, math.floor(fraction * n + 0.5)))


def _top(scores, count):
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:count]


def _argmax(xs):
    best, best_val = 0, xs[0]
    for i, v in enumerate(xs):
        if v > best_val:
            best, best_val = i, v
    return best


def oracle_pipeline(
    views,
    original_index,
    descriptions,
    base_class_embeddings,
    bank_prototypes,
    bank_counts,
    q=0.10,
    p=0.05,
    alpha=(1.0, 2.0),
    beta=(2.0, 1.0),
    K=3,
    T=0.3,
    tau=100.0,
    epsilon=1e-8,
    renormalize_anchors=True,
    bank_commit="original",
):
    """Run the whole per-sample flow on nested lists; returns a dict of
    every intermediate worth comparing. Mutates nothing: the bank arrays
    are copied before the commit step."""
    n_views = len(views)
    n_classes = len(descriptions)
    n_desc = len(descriptions[0])

    # base classifier logits (prompt at its initial value)
    enc = [_normalize(_normalize(u)) for u in base_class_embeddings]
    z0 = [
        [tau * _dot(_normalize(v), e) for e in enc]
        for v in views
    ]
    zero_shot_pred = _argmax(z0[original_index])
    pseudo_label = zero_shot_pred

    # text anchors: softmax of marginal benefit over descriptions,
    # averaged over all views, then a weighted description sum
    class_means = [
        [sum(descriptions[c][i][d] for i in range(n_desc)) / n_desc
         for d in range(len(descriptions[c][0]))]
        for c in range(n_classes)
    ]
    avg_attn = [[0.0] * n_desc for _ in range(n_classes)]
    for v in views:
        for c in range(n_classes):
            scores = [
                _cos(v, descriptions[c][i]) - _cos(v, class_means[c])
                for i in range(n_desc)
            ]
            attn = _softmax(scores)
            for i in range(n_desc):
                avg_attn[c][i] += attn[i] / n_views
    anchors = []
    for c in range(n_classes):
        t = [
            sum(avg_attn[c][i] * descriptions[c][i][d] for i in range(n_desc))
            for d in range(len(descriptions[c][0]))
        ]
        anchors.append(_normalize(t) if renormalize_anchors else t)

    # stage 1: joint alignment/confidence score against the text anchors
    text_scores = []
    for v in views:
        sims = [_cos(v, t) for t in anchors]
        conf = 1.0 - _entropy_norm(_softmax(sims, tau))
        text_scores.append(alpha[0] * max(sims) + alpha[1] * conf)
    selected_text = _top(text_scores, _count(n_views, q))

    # prototype bank commit under the pre-adaptation prediction
    protos = [list(row) for row in bank_prototypes]
    counts = list(bank_counts)
    commit = (
        sorted(selected_text) if bank_commit == "selected" else [original_index]
    )
    for idx in commit:
        n = counts[pseudo_label]
        protos[pseudo_label] = [
            (n * pc + ve) / (n + 1)
            for pc, ve in zip(protos[pseudo_label], views[idx])
        ]
        counts[pseudo_label] = n + 1

    # rank classes by mean text-anchor prediction over selected views
    pi_bar = [0.0] * n_classes
    for idx in selected_text:
        dist = _softmax([_cos(views[idx], t) for t in anchors], tau)
        for c in range(n_classes):
            pi_bar[c] += dist[c] / len(selected_text)
    ranked = sorted(range(n_classes), key=lambda c: (-pi_bar[c], c))[: min(K, n_classes)]
    anchor_classes = [c for c in ranked if counts[c] > 0]

    # stage 2: alignment to prototype anchors plus image-side confidence;
    # with no populated ranked class, alignment falls back to the full
    # representation set, and only an entirely empty bank selects nothing
    reps = [protos[c] if counts[c] > 0 else anchors[c] for c in range(n_classes)]
    if anchor_classes:
        align_targets = [protos[c] for c in anchor_classes]
    elif any(cnt > 0 for cnt in counts):
        align_targets = reps
    else:
        align_targets = None
    if align_targets is not None:
        image_scores = []
        for v in views:
            align = max(_cos(v, m) for m in align_targets)
            conf = 1.0 - _entropy_norm(_softmax([_cos(v, m) for m in reps], tau))
            image_scores.append(beta[0] * align + beta[1] * conf)
        selected_image = _top(image_scores, _count(n_views, p))
    else:
        image_scores = None
        selected_image = []

    union = sorted(set(selected_text) | set(selected_image))

    # three prediction sources on the union views
    z_prompt = [z0[i] for i in union]
    z_text = [[tau * _cos(views[i], t) for t in anchors] for i in union]
    z_image = [[tau * _cos(views[i], m) for m in reps] for i in union]

    weights = []
    for zp, zt, zi in zip(z_prompt, z_text, z_image):
        gammas = [max(_softmax(z)) for z in (zp, zt, zi)]
        denom = sum(gammas) + epsilon
        weights.append([g / denom for g in gammas])

    z_ens = [
        [w[0] * zp[c] + w[1] * zt[c] + w[2] * zi[c] for c in range(n_classes)]
        for w, zp, zt, zi in zip(weights, z_prompt, z_text, z_image)
    ]
    mean_probs = [0.0] * n_classes
    for row in z_ens:
        probs = _softmax(row)
        for c in range(n_classes):
            mean_probs[c] += probs[c] / len(z_ens)
    powered = [x ** (1.0 / T) for x in mean_probs]
    total = sum(powered)
    q_tilde = [x / total for x in powered]

    z_bar = [
        sum(row[c] for row in z_prompt) / len(z_prompt) for c in range(n_classes)
    ]
    p_v = _softmax(z_bar)
    loss = sum(
        qc * (math.log(qc) - math.log(pc))
        for qc, pc in zip(q_tilde, p_v)
        if qc > 0.0
    )

    weight_means = [
        sum(w[k] for w in weights) / len(weights) for k in range(3)
    ]

    return {
        "zero_shot_pred": zero_shot_pred,
        "text_scores": text_scores,
        "anchors": anchors,
        "selected_text": selected_text,
        "prototypes": protos,
        "counts": counts,
        "pi_bar": pi_bar,
        "ranked_classes": ranked,
        "anchor_classes": anchor_classes,
        "image_scores": image_scores,
        "selected_image": selected_image,
        "union": union,
        "z_ens": z_ens,
        "q_tilde": q_tilde,
        "loss": loss,
        "weight_means": weight_means,
    }
