from __future__ import annotations

import os

from jtnoma.config import InvalidConfigError


class ScenarioConfigs:
    """
    This class provides methods to access the built-in sweep scenarios.
    """

    @staticmethod
    def _get_scenarios_folder_path() -> str:
        """
        Helper method to get the folder path for default scenarios.

        Returns:
            str: The absolute path to the default scenarios folder.
        """
        package_directory = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        return os.path.join(package_directory, "default_scenarios")

    @staticmethod
    def get_scenarios() -> list[str]:
        """
        List all the scenario names that can be passed to the sweep command.

        Returns:
            list[str]: A sorted list of scenario names.
        """
        folder_path = ScenarioConfigs._get_scenarios_folder_path()
        return sorted(
            os.path.splitext(file_name)[0]
            for file_name in os.listdir(folder_path)
            if file_name.endswith(".yaml")
        )

    @staticmethod
    def get_scenario_path(scenario: str) -> str:
        """
        Get the path of a built-in scenario file.

        Args:
            scenario (str): The name of the scenario, e.g. "web".

        Raises:
            InvalidConfigError: If no built-in scenario has that name.
        """
        if scenario not in ScenarioConfigs.get_scenarios():
            raise InvalidConfigError(
                f"Unknown scenario '{scenario}'."
                f" Available scenarios: {', '.join(ScenarioConfigs.get_scenarios())}"
            )
        return os.path.join(ScenarioConfigs._get_scenarios_folder_path(), f"{scenario}.yaml")
