"""Template-generated synthetic bitext for desk-scale end-to-end runs.

Each cluster shares two content words across all of its target-side variants,
so paraphrase relationships are learnable by a small encoder; source-side
sentences repeat per cluster, which is what the mining stage exploits.
"""

from __future__ import annotations

from .corpus import AlignedPair
from .numeric import SeededRng

_CONTENT_WORDS = [
    "zebra", "river", "garden", "piano", "autumn", "candle", "harbor", "meadow",
    "falcon", "lantern", "orchard", "thunder", "violet", "walnut", "anchor",
    "breeze", "canyon", "dolphin", "ember", "fjord", "glacier", "hammock",
    "island", "jasmine", "kestrel", "lagoon", "mosaic", "nectar", "obelisk",
    "pebble", "quartz", "raven", "saffron", "tundra", "umbrella", "vessel",
    "willow", "yonder", "zephyr", "basilica", "cobalt", "dagger", "eclipse",
    "fountain", "granite", "harvest", "ivory", "juniper", "kettle", "lighthouse",
    "marble", "nimbus", "oasis", "prairie", "quiver", "ripple", "sundial",
    "timber", "urchin", "valley", "whisper", "xylophone", "yarrow", "zenith",
    "amber", "bramble", "cinder", "drizzle", "estuary", "fennel", "gully",
    "heather", "inlet", "jetty", "knoll", "loam", "mistral", "nettle",
    "outcrop", "plume", "quay", "reed", "shale", "thicket", "updraft",
    "vine", "wharf", "yew", "zinc", "arbor", "boulder", "crest", "dune",
    "eddy", "flint", "grove", "hollow", "isle", "jade", "karst", "ledge",
]

_TEMPLATES = [
    "the {w1} stood near the old {w2} all day",
    "a quiet {w1} rested beside that {w2} again",
    "the {w1} waited close to the {w2} today",
    "one small {w1} stayed right by the {w2} there",
    "that {w1} remained next to a {w2} for hours",
    "the {w1} lingered around the big {w2} slowly",
]


def make_clustered_corpus(
    n_clusters: int = 50, sentences_per_cluster: int = 6, seed: int = 0
) -> list[AlignedPair]:
    """Aligned corpus of n_clusters groups; every pair in a cluster shares the
    same source sentence, forcing the miner to group its targets."""
    if sentences_per_cluster > len(_TEMPLATES):
        raise ValueError("not enough templates for requested cluster size")
    rng = SeededRng(seed).substream("synthetic")
    words = rng.shuffle(_CONTENT_WORDS)
    pairs: list[AlignedPair] = []
    for c in range(n_clusters):
        w1 = words[(2 * c) % len(words)]
        w2 = words[(2 * c + 1) % len(words)]
        source = f"the {w1} stood near the old {w2} all day"
        for t in range(sentences_per_cluster):
            target = _TEMPLATES[t].format(w1=w1, w2=w2)
            pairs.append(AlignedPair(source, target))
    return pairs
