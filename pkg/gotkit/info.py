# -*- coding: utf-8 -*-

__all__ = ['__version__', '__author__']

__version__ = '0.1.0'
__author__ = 'gotkit contributors'
