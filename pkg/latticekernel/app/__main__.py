import sys

from .core import LatticeKernelApp


def main(argv=None):
    app = LatticeKernelApp()
    return app.run(argv)


if __name__ == "__main__":
    sys.exit(main())
