package org.springframework.samples.petclinic.service;

import java.util.Collection;
import org.springframework.samples.petclinic.model.Owner;
import org.springframework.samples.petclinic.model.Pet;
import org.springframework.samples.petclinic.model.Vet;
import org.springframework.samples.petclinic.model.Visit;

public interface ClinicService {

    Owner findOwnerById(int id);

    Collection<Owner> findOwnerByLastName(String lastName);

    void saveOwner(Owner owner);

    void savePet(Pet pet);

    void saveVisit(Visit visit);

    Collection<Vet> findVets();
}
