import argparse


def parse():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=str, default="configs/model.yaml")
    p.add_argument("--batch-size", default=256)
    p.add_argument("--lr", default=0.0005)
    p.add_argument("--train-iters", default=132000)
    return p.parse_args()


if __name__ == "__main__":
    args = parse()
