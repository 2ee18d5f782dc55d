import sys
sys.path.append('.')
from smoothfem.config.settings import Config
from smoothfem.scripts.reproduce_tables import reproduce_tables

if __name__ == '__main__':
    for path in reproduce_tables(Config.OUT):
        print(path)
