#include "mano/cli.hpp"

int main(int argc, char** argv) { return mano::run_cli(argc, argv); }
