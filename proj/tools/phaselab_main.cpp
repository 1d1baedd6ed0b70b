#include "phaselab/app.hpp"

int main(int argc, char** argv) { return phaselab::app::run(argc, argv); }
