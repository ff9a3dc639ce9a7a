#include "spoofsynth/cli.hpp"

int main(int argc, char** argv) { return spoofsynth::run_cli(argc, argv); }
