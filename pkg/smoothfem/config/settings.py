import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    THREADS = max(1, int(os.environ.get('SMOOTHFEM_THREADS', '1')))
    LOG_LEVEL = os.environ.get('SMOOTHFEM_LOG_LEVEL', 'INFO').upper()
    OUT = os.environ.get('SMOOTHFEM_OUT', 'results')
