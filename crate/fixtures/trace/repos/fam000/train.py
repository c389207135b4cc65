import argparse


def parse():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=str, default="configs/model.yaml")
    p.add_argument("--batch-size", default=128)
    p.add_argument("--lr", default=0.0001)
    p.add_argument("--num-epochs", default=51)
    return p.parse_args()


if __name__ == "__main__":
    args = parse()
