"""
Model utility functions and mixins.
"""

import json


class StorageMixin:
    """
    Adds JSON file storage capabilities to any model class.

    Classes that utilize this mixin need to implement the following attributes:
      - base_path
      - storage_name (a filesystem-safe stem, unique within base_path)
      - to_dict()

    Attributes:
        STORAGE_SUBDIR: Directory below base_path where files are kept.
        EXTENSION: File extension of every stored file.
        base_path: A pathlib Path object which refers to the root directory
            where all storage data should be located.
    """

    STORAGE_SUBDIR = 'traces'
    EXTENSION = '.json'

    base_path = None

    def storage_path(self, *, create_parents=False):
        """
        Use the current state of the model to make a unique filesystem name.

        Args:
            create_parents: If True, try to create all necessary parent
                directories before returning. This should be enabled during
                calls that intend to write to the path, and False during read.

        Returns:
            Complete base path plus the subdirectory/file names that reference
            the file data.
        """
        if self.base_path is None:
            raise RuntimeError('base_path should not be None')

        prefix = self.base_path / self.STORAGE_SUBDIR
        if create_parents:
            prefix.mkdir(parents=True, exist_ok=True)

        return prefix / f'{self.storage_name}{self.EXTENSION}'

    def set_storage_data(self):
        """
        Write the dict representation of this instance to the storage path.

        Returns:
            The path that was written.
        """
        path = self.storage_path(create_parents=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

        return path
