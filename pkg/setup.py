from setuptools import setup, find_packages

setup(
    name='aloe-sim',
    packages=[
        package for package in find_packages(exclude=['tests', 'tests.*'])
    ],
    py_modules=['eval', 'metrics', 'run_al', 'trainer', 'visualization_utils'],
    version='0.1.0',
    install_requires=[
        'easydict',
        'matplotlib',
        'numpy',
        'pandas',
        'pytorch-lightning',
        'pyyaml',
        'scikit-learn',
        'scipy',
        'torch',
        'tqdm',
    ],
)
