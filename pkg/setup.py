import re
from setuptools import find_namespace_packages, setup

with open('marisr/__init__.py', 'r') as fh:
    version = re.search(r"__version__ = '(.*?)'", fh.read()).group(1)

with open('README.md', 'r') as fh:
    readme = fh.read()

setup(
    name='marisr',
    version=version,
    description='Robust transmission design for movable-antenna, RIS-enabled symbiotic radio.',
    long_description=readme,
    packages=find_namespace_packages(include=['marisr', 'marisr.*']),
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.10',
    install_requires=[
        'Flask==3.1.3',
        'cvxpy==1.6.0',
        'numpy==2.1.3',
        'scipy==1.14.1',
        'tomli>=1.1.0; python_version < "3.11"'
    ],
    extras_require={
        'dev': [
            'flake8==6.0.0',
            'pytest-cov==4.0.0',
            'pytest==7.3.1',
            'python-dotenv==1.0.0'
        ]
    },
    entry_points={
        'console_scripts': [
            'marisr = marisr.cli:main'
        ]
    },
)
