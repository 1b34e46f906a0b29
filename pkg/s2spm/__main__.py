"""Allow ``python -m s2spm``."""
from .cli import main

main()
