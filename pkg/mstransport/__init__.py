# Maxwell-Stefan multicomponent transport with operator splitting

__version__ = "1.0.0"
