#include "etr/pipeline.hpp"

int main(int argc, char** argv) { return etr::run_cli(argc, argv); }
