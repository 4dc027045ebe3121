"""
Picking a style exemplar with average hashes
============================================

A 64-bit average hash fingerprints each image's coarse light/dark
layout. Small Hamming distance means similar composition, which is how
a content panel gets matched to the style exemplar it will borrow its
look from. Composition classes (shot distance x subject count) narrow
the candidate pool first when requested.
"""

import numpy as np

from panelstyle import average_hash, hamming, select_style
from panelstyle.style_select import CompositionClass, StyleExemplar, filter_by_composition

rng = np.random.default_rng(21)


def vignette(dark_side: str, size: int = 64) -> np.ndarray:
    """A light canvas with one darkened side."""
    img = np.full((size, size, 3), 230, dtype=np.uint8)
    if dark_side == "left":
        img[:, : size // 2] = 40
    elif dark_side == "right":
        img[:, size // 2 :] = 40
    else:
        img[: size // 2, :] = 40
    noise = rng.integers(0, 20, size=img.shape, dtype=np.uint8)
    return np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8)


# Hashes of similar layouts sit close together, dissimilar ones far apart.
left_a, left_b, right = vignette("left"), vignette("left"), vignette("right")
print("hash(left_a)  =", average_hash(left_a).to_hex())
print("hash(left_b)  =", average_hash(left_b).to_hex())
print("hash(right)   =", average_hash(right).to_hex())
print("d(left_a, left_b) =", hamming(average_hash(left_a), average_hash(left_b)))
print("d(left_a, right)  =", hamming(average_hash(left_a), average_hash(right)))

# Selection returns the catalog entry with the smallest distance.
close_one = CompositionClass(shot="close", object_count_bucket="one")
medium_many = CompositionClass(shot="medium", object_count_bucket="many")
catalog = [
    StyleExemplar("ex_left", "styles", close_one, vignette("left")),
    StyleExemplar("ex_right", "styles", medium_many, vignette("right")),
    StyleExemplar("ex_top", "styles", medium_many, vignette("top")),
]
content = vignette("left")
winner, distance = select_style(content, catalog, "whole")
print(f"\nnearest exemplar to a left-shaded panel: {winner.exemplar_id} (distance {distance})")

# Composition filtering restricts the pool before the hash race; when
# nothing matches the class, the full pool is kept as a fallback.
pool = filter_by_composition(catalog, medium_many)
print("medium/many pool:", [e.exemplar_id for e in pool])
winner, distance = select_style(content, pool, "whole")
print(f"best within that class: {winner.exemplar_id} (distance {distance})")
