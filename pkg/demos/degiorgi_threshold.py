"""Closed-form De Giorgi threshold against the extremal recursion."""
from fracstate import IterationLemmaInput, degiorgi_threshold, degiorgi_verify
from fracstate.bounds import steps_to_reach


def main():
    for inp in (IterationLemmaInput(1, 1, 2), IterationLemmaInput(4, 2, 2),
                IterationLemmaInput(0.5, 1.5, 1.25, 2.0, 3.0)):
        m = steps_to_reach(inp)
        at = degiorgi_verify(inp, m)
        short = degiorgi_verify(inp, 60, shrink=0.9)
        print(f"{inp}: threshold {degiorgi_threshold(inp):.6g}, bound after {m} steps "
              f"{at['bound_at_threshold']:.1e}, 10% short log-bound after 60 steps {short['final_log_bound']:.3g}")


if __name__ == "__main__":
    main()
