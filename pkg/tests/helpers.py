from dlspectra.dl_graph import ORIGIN, dl_neighbors


def random_vertex(rng, q, r, steps=10):
    x = ORIGIN
    for _ in range(steps):
        x = rng.choice(dl_neighbors(x, q, r))
    return x
