# %% [markdown]
# # Walking one scene through the pipeline
#
# We render a synthetic scene, then look at what each stage contributes:
# the background marker, the leaf marker, the initial segmentation and the
# refined mask. Every intermediate is written as a PNG next to this script
# so it can be opened in any viewer.

# %%
from pathlib import Path

import numpy as np

from leafextract import PipelineConfig, extract_leaf, generate_synthetic_scene, precision_recall
from leafextract.io import write_mask, write_overlay

OUT = Path(__file__).with_name("output") / "walkthrough"
OUT.mkdir(parents=True, exist_ok=True)

img, truth = generate_synthetic_scene(seed=3, difficulty="textured")
print("image", img.shape, "leaf pixels", int(truth.sum()))

# %% [markdown]
# ## Running the whole thing
#
# `extract_leaf` returns the final mask together with every intermediate.

# %%
res = extract_leaf(img, PipelineConfig(method="watershed", refine="full"))

bg = res.background
for name, mask in [("bg_index", bg.index_background), ("bg_color", bg.color_background),
                   ("bg_entropy", bg.entropy_background), ("bg_marker", bg.marker),
                   ("leaf_marker", res.leaf.marker), ("initial", res.initial), ("final", res.mask)]:
    write_mask(OUT / f"{name}.png", mask)
    print(f"{name:12s} {int(mask.sum()):7d} px")
write_overlay(OUT / "overlay.png", res.image, res.mask)

# %% [markdown]
# ## How much did refinement help?
#
# The textured scenes carry a grass blade touching the leaf and bright
# specular spots at the margin, which is where outline repair earns its
# keep.

# %%
for label, mask in [("initial", res.initial), ("after veins", res.after_veins), ("final", res.mask)]:
    p, r = precision_recall(mask, truth)
    print(f"{label:12s} P={p:.4f} R={r:.4f}")

print("vein case:", res.veins.case if res.veins else "skipped")
if res.polar is not None:
    flagged = sum(int(f.sum()) for f in res.polar.flags)
    print("polar samples flagged as anomalous:", flagged)

# %% [markdown]
# ## Markers never overlap
#
# The leaf marker lies strictly inside the final leaf and never touches the
# background marker, which is what lets both segmenters treat them as hard
# seeds.

# %%
assert not (res.leaf.marker & bg.marker).any()
assert not (res.leaf.marker & ~res.initial).any()
print("fraction of the image seeded:", np.mean(res.leaf.marker | bg.marker).round(3))
