"""Regenerates logodds.json by evaluating the weighted log-odds formula
term by term with plain floats."""
import json
import math
import pathlib

groups = {
    "i": {"a": 5, "b": 1, "c": 2},
    "j": {"a": 1, "b": 5, "c": 2},
}
alpha0 = 1.0

pooled = {}
for counts in groups.values():
    for w, c in counts.items():
        pooled[w] = pooled.get(w, 0) + c
pooled_total = sum(pooled.values())

entries = []
for g, counts in groups.items():
    rest = {}
    for other, oc in groups.items():
        if other != g:
            for w, c in oc.items():
                rest[w] = rest.get(w, 0) + c
    n_i, n_j = sum(counts.values()), sum(rest.values())
    for w in sorted(pooled):
        a_w = alpha0 * pooled[w] / pooled_total
        yi, yj = counts.get(w, 0), rest.get(w, 0)
        delta = math.log((yi + a_w) / (n_i + alpha0 - yi - a_w)) - math.log((yj + a_w) / (n_j + alpha0 - yj - a_w))
        var = 1 / (yi + a_w) + 1 / (yj + a_w)
        entries.append({"group": g, "term": w, "alpha_w": a_w, "delta": delta, "variance": var, "z": delta / math.sqrt(var)})

out = pathlib.Path(__file__).resolve().parent.parent / "logodds.json"
out.write_text(json.dumps({"alpha0": alpha0, "groups": groups, "entries": entries}, indent=1) + "\n")
