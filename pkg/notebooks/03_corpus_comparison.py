# %% [markdown]
# # Small corpus comparisons
#
# Scores a handful of synthetic scenes under a few configurations. The
# numbers are desk-scale: the scenes are generated, not photographed, so
# they show the direction of each effect rather than field accuracy.

# %%
from leafextract.evaluation import SyntheticItem, evaluate_corpus, synthetic_items
from leafextract.pipeline import PipelineConfig

N = 6

# %% [markdown]
# ## Refinement on or off
#
# `textured` scenes carry outline defects. Compare the mask before and after
# refinement with both segmenters.

# %%
items = synthetic_items(N, 0, "textured")
for method in ("watershed", "graphcut"):
    for refine in ("none", "full"):
        rep = evaluate_corpus(items, PipelineConfig(method=method, refine=refine))
        print(f"{method:9s} refine={refine:4s} P={rep.mean_precision:.4f} R={rep.mean_recall:.4f}")

# %% [markdown]
# ## Strong veins
#
# Darker veins put high gradients inside the leaf. The flooding segmenter
# can stall on them, the min cut is less bothered.

# %%
veiny = [(f"veins_{s}", SyntheticItem(s, "easy", 0.45)) for s in range(N)]
for method in ("watershed", "graphcut"):
    rep = evaluate_corpus(veiny, PipelineConfig(method=method, refine="none"))
    print(f"{method:9s} initial recall {rep.mean_recall:.4f}")

# %% [markdown]
# ## Occluding leaves
#
# Same-hue neighbors behind the target are the hard case: the leaf marker
# has to be cut away from them along internal edges.

# %%
rep = evaluate_corpus(synthetic_items(N, 0, "occluded"), PipelineConfig())
print(rep.to_table())
